#include "chainbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "chainbsde/error.hpp"

namespace chainbsde {

namespace {

std::string format_tag(std::string_view name, std::initializer_list<double> params) {
    std::ostringstream os;
    os.precision(17);
    os << name << '(';
    bool first = true;
    for (double p : params) {
        if (!first) os << ',';
        os << p;
        first = false;
    }
    os << ')';
    return os.str();
}

void append_vector(std::string& tag, const Vector& v) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
    os << ']';
    tag += os.str();
}

void check_terminal(const ChainModel& model, const Vector& xi) {
    if (static_cast<std::size_t>(xi.size()) != model.states())
        throw Error(ErrorCode::DimensionMismatch, "terminal condition must have N entries");
    if (!xi.allFinite()) throw Error(ErrorCode::NonFinite, "terminal condition is not finite");
}

// Writes F(t, u) = f(t, u_i, u, i) + (A'u)_i, the backward-time derivative.
void backward_rhs(const Driver& driver, const Matrix& rates, double t, const Vector& u,
                  Vector& out) {
    out.noalias() = rates.transpose() * u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        out(i) += driver(t, u(i), u, static_cast<std::size_t>(i), rates);
    }
}

void throw_non_finite(double t) {
    std::ostringstream os;
    os << "solution left the finite range at t = " << t
       << "; the driver is too stiff for this grid";
    throw Error(ErrorCode::NonFinite, os.str());
}

// Calls fn(t0, t1, state) for each maximal piece of [a, b] on which the path
// holds one state.
template <class Fn>
void for_each_piece(const ChainPath& path, double a, double b, Fn&& fn) {
    auto jump = std::upper_bound(path.jumps.begin(), path.jumps.end(), a,
                                 [](double value, const Jump& j) { return value < j.time; });
    std::size_t state = jump == path.jumps.begin() ? path.initial : std::prev(jump)->state;
    double t = a;
    while (jump != path.jumps.end() && jump->time < b) {
        fn(t, jump->time, state);
        t = jump->time;
        state = jump->state;
        ++jump;
    }
    fn(t, b, state);
}

}  // namespace

Driver zero_driver() {
    return Driver{[](double, double, const Vector&, std::size_t, const Matrix&) { return 0.0; },
                  0.0, 0.0, {}, "zero()"};
}

Driver constant_driver(double c) {
    return Driver{[c](double, double, const Vector&, std::size_t, const Matrix&) { return c; },
                  0.0, 0.0, {}, format_tag("constant", {c})};
}

Driver linear_driver(double a) {
    return Driver{[a](double, double y, const Vector&, std::size_t, const Matrix&) { return a * y; },
                  std::abs(a), 0.0, {}, format_tag("linear", {a})};
}

Driver affine_driver(double a, double b, Vector alpha, Vector beta) {
    if (alpha.size() != beta.size())
        throw Error(ErrorCode::DimensionMismatch, "affine driver needs alpha and beta of equal size");
    std::string tag = format_tag("affine", {a, b});
    append_vector(tag, alpha);
    append_vector(tag, beta);
    auto eval = [a, b, alpha = std::move(alpha), beta = std::move(beta)](
                    double t, double y, const Vector& z, std::size_t state, const Matrix& rates) {
        const auto i = static_cast<Eigen::Index>(state);
        double value = a * y + alpha(i) + beta(i) * t;
        if (b != 0.0) value += b * std::sqrt(seminorm_sq(rates, state, z));
        return value;
    };
    return Driver{std::move(eval), std::abs(a), std::abs(b), {}, std::move(tag)};
}

Driver with_forcing(Driver driver, ForcingFn forcing) {
    driver.forcing = std::move(forcing);
    return driver;
}

double lipschitz_probe(const ChainModel& model, const Driver& driver, std::size_t probes,
                       std::uint64_t seed) {
    auto rng = substream(seed, 0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> when(0.0, model.horizon());
    std::uniform_int_distribution<std::size_t> pick(0, model.states() - 1);
    const auto n = static_cast<Eigen::Index>(model.states());
    double worst = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        const double t = when(rng);
        const std::size_t i = pick(rng);
        const Matrix& rates = model.rates_at(t);
        const double y1 = 3.0 * unit(rng);
        const double y2 = 3.0 * unit(rng);
        Vector z1(n), z2(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            z1(j) = 3.0 * unit(rng);
            z2(j) = 3.0 * unit(rng);
        }
        const double lhs = std::abs(driver(t, y1, z1, i, rates) - driver(t, y2, z2, i, rates));
        const double rhs = driver.lipschitz_y * std::abs(y1 - y2) +
                           driver.lipschitz_z * std::sqrt(seminorm_sq(rates, i, z1 - z2));
        if (rhs > 0.0) {
            worst = std::max(worst, lhs / rhs);
        } else if (lhs > 0.0) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return worst;
}

double ValueGrid::at(double t, std::size_t state) const {
    const auto col = static_cast<Eigen::Index>(state);
    if (t <= times.front()) return values(0, col);
    if (t >= times.back()) return values(values.rows() - 1, col);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto hi = static_cast<Eigen::Index>(std::distance(times.begin(), it));
    const auto lo = hi - 1;
    const double w = (t - times[static_cast<std::size_t>(lo)]) /
                     (times[static_cast<std::size_t>(hi)] - times[static_cast<std::size_t>(lo)]);
    return (1.0 - w) * values(lo, col) + w * values(hi, col);
}

std::size_t snap_steps(const ChainModel& model, std::size_t steps) {
    const double horizon = model.horizon();
    for (std::size_t mult = 1; mult <= 64; ++mult) {
        const double k = static_cast<double>(steps * mult);
        bool aligned = true;
        for (const auto& seg : model.schedule()) {
            const double pos = seg.start / horizon * k;
            if (std::abs(pos - std::round(pos)) > 1e-9) {
                aligned = false;
                break;
            }
        }
        if (aligned) return steps * mult;
    }
    return steps;
}

ValueGrid solve_bsde(const ChainModel& model, const Driver& driver, const Vector& xi,
                     std::size_t steps) {
    if (steps == 0) throw Error(ErrorCode::BadSchedule, "steps must be at least 1");
    check_terminal(model, xi);
    const auto n = static_cast<Eigen::Index>(model.states());

    ValueGrid grid;
    grid.times = uniform_grid(model.horizon(), steps);
    grid.values.resize(static_cast<Eigen::Index>(steps + 1), n);
    grid.values.row(static_cast<Eigen::Index>(steps)) = xi.transpose();

    Vector u = xi;
    Vector k1(n), k2(n), k3(n), k4(n), stage(n);
    for (std::size_t k = steps; k > 0; --k) {
        const double t_hi = grid.times[k];
        const double t_lo = grid.times[k - 1];
        const double h = t_hi - t_lo;
        const double t_mid = 0.5 * (t_hi + t_lo);
        const Matrix& rates = model.rates_at(t_mid);

        backward_rhs(driver, rates, t_hi, u, k1);
        stage = u + 0.5 * h * k1;
        backward_rhs(driver, rates, t_mid, stage, k2);
        stage = u + 0.5 * h * k2;
        backward_rhs(driver, rates, t_mid, stage, k3);
        stage = u + h * k3;
        backward_rhs(driver, rates, t_lo, stage, k4);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if (!u.allFinite()) throw_non_finite(t_lo);
        grid.values.row(static_cast<Eigen::Index>(k - 1)) = u.transpose();
    }
    return grid;
}

ValueGrid solve_bsde_euler(const ChainModel& model, const Driver& driver, const Vector& xi,
                           std::size_t steps) {
    if (steps == 0) throw Error(ErrorCode::BadSchedule, "steps must be at least 1");
    check_terminal(model, xi);
    const auto n = static_cast<Eigen::Index>(model.states());

    ValueGrid grid;
    grid.times = uniform_grid(model.horizon(), steps);
    grid.values.resize(static_cast<Eigen::Index>(steps + 1), n);
    grid.values.row(static_cast<Eigen::Index>(steps)) = xi.transpose();

    Vector u = xi;
    Vector slope(n);
    for (std::size_t k = steps; k > 0; --k) {
        const double t_hi = grid.times[k];
        const double h = t_hi - grid.times[k - 1];
        backward_rhs(driver, model.rates_at(0.5 * (t_hi + grid.times[k - 1])), t_hi, u, slope);
        u += h * slope;
        if (!u.allFinite()) throw_non_finite(grid.times[k - 1]);
        grid.values.row(static_cast<Eigen::Index>(k - 1)) = u.transpose();
    }
    return grid;
}

void write_csv(std::ostream& out, const ValueGrid& grid, std::string_view prefix) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << 't';
    for (std::size_t i = 1; i <= grid.states(); ++i) out << ',' << prefix << '_' << i;
    out << '\n';
    for (std::size_t k = 0; k < grid.times.size(); ++k) {
        out << grid.times[k];
        for (Eigen::Index i = 0; i < grid.values.cols(); ++i) {
            out << ',' << grid.values(static_cast<Eigen::Index>(k), i);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

PathEvaluation evaluate_on_path(const ChainModel& model, const ValueGrid& sol,
                                const ChainPath& path) {
    if (std::abs(sol.horizon() - model.horizon()) > 1e-12 ||
        std::abs(path.horizon - model.horizon()) > 1e-12)
        throw Error(ErrorCode::GridMismatch, "solution, path and model must share the horizon");
    const std::size_t nodes = sol.times.size();
    PathEvaluation eval;
    eval.y.resize(nodes);
    eval.integral.assign(nodes, 0.0);
    const auto increments = martingale_increments(model, path, sol.times);
    for (std::size_t k = 0; k < nodes; ++k) {
        const auto state = static_cast<Eigen::Index>(path.state_at(sol.times[k]));
        eval.y[k] = sol.values(static_cast<Eigen::Index>(k), state);
        if (k > 0) {
            eval.integral[k] =
                eval.integral[k - 1] +
                sol.values.row(static_cast<Eigen::Index>(k - 1)).dot(increments[k - 1]);
        }
    }
    return eval;
}

double residual_check(const ChainModel& model, const ValueGrid& sol, const ChainPath& path,
                      const Driver& driver, const Vector& xi) {
    const PathEvaluation eval = evaluate_on_path(model, sol, path);
    const std::size_t nodes = sol.times.size();

    // drift[k] = int_0^{t_k} f ds with f frozen at the left node of each cell.
    std::vector<double> drift(nodes, 0.0);
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double t0 = sol.times[k];
        const double t1 = sol.times[k + 1];
        const Vector z = sol.z(k);
        const Matrix& rates = model.rates_at(0.5 * (t0 + t1));
        double cell = 0.0;
        for_each_piece(path, t0, t1, [&](double a, double b, std::size_t state) {
            const double y = z(static_cast<Eigen::Index>(state));
            cell += (b - a) * driver(t0, y, z, state, rates);
        });
        drift[k + 1] = drift[k] + cell;
    }

    const double terminal = xi(static_cast<Eigen::Index>(path.terminal()));
    double worst = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double forward = terminal + (drift.back() - drift[k]) -
                               (eval.integral.back() - eval.integral[k]);
        worst = std::max(worst, std::abs(eval.y[k] - forward));
    }
    return worst;
}

}  // namespace chainbsde
