#include "chainbsde/rbsde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "chainbsde/error.hpp"
#include "chainbsde/montecarlo.hpp"

namespace chainbsde {

namespace {

Driver penalized_driver(const Driver& base, const Obstacle& obstacle, long penalty) {
    Driver d = base;
    const auto n = static_cast<double>(penalty);
    d.eval = [eval = base.eval, obstacle, n](double t, double y, const Vector& z, std::size_t state,
                                             const Matrix& rates) {
        const double below = obstacle(t, state) - y;
        return eval(t, y, z, state, rates) + (below > 0.0 ? n * below : 0.0);
    };
    d.lipschitz_y = base.lipschitz_y + n;
    return d;
}

Matrix penalty_intensity(const ValueGrid& values, const Matrix& g, long penalty) {
    return (static_cast<double>(penalty) * (g - values.values)).cwiseMax(0.0);
}

RbsdeSolution finish(PenalizedSolution level, const Matrix& g) {
    RbsdeSolution sol;
    sol.values = std::move(level.values);
    sol.values.values = sol.values.values.cwiseMax(g);
    sol.intensity = std::move(level.intensity);
    sol.obstacle = g;
    sol.n_final = level.penalty;
    return sol;
}

bool same_model(const ChainModel& a, const ChainModel& b) {
    if (a.states() != b.states() || a.horizon() != b.horizon() ||
        a.schedule().size() != b.schedule().size())
        return false;
    for (std::size_t s = 0; s < a.schedule().size(); ++s) {
        if (a.schedule()[s].start != b.schedule()[s].start ||
            a.schedule()[s].rates != b.schedule()[s].rates)
            return false;
    }
    return true;
}

// Integral of the piecewise-linear intensity column over [a, b] inside cell k.
double cell_integral(const RbsdeSolution& sol, std::size_t k, std::size_t state, double a, double b) {
    const auto& times = sol.values.times;
    const double h = times[k + 1] - times[k];
    const auto col = static_cast<Eigen::Index>(state);
    const double lo = sol.intensity(static_cast<Eigen::Index>(k), col);
    const double hi = sol.intensity(static_cast<Eigen::Index>(k + 1), col);
    const double mid = 0.5 * (a + b);
    return (b - a) * (lo + (hi - lo) * (mid - times[k]) / h);
}

}  // namespace

double RbsdeSolution::min_level_increase() const {
    double worst = 0.0;
    for (const auto& level : ladder) worst = std::min(worst, level.min_increase);
    return worst;
}

Obstacle no_obstacle() {
    return Obstacle{[](double, std::size_t) { return -1e6; }, "none()"};
}

Obstacle constant_obstacle(double level) {
    std::ostringstream os;
    os.precision(17);
    os << "constant(" << level << ')';
    return Obstacle{[level](double, std::size_t) { return level; }, os.str()};
}

Obstacle affine_obstacle(Vector offset, Vector slope, double horizon) {
    if (offset.size() != slope.size())
        throw Error(ErrorCode::DimensionMismatch, "obstacle offset and slope differ in size");
    std::ostringstream os;
    os.precision(17);
    os << "affine(" << horizon << ")[";
    for (Eigen::Index i = 0; i < offset.size(); ++i) os << (i ? "," : "") << offset(i);
    os << "][";
    for (Eigen::Index i = 0; i < slope.size(); ++i) os << (i ? "," : "") << slope(i);
    os << ']';
    auto fn = [offset = std::move(offset), slope = std::move(slope), horizon](double t,
                                                                             std::size_t state) {
        const auto i = static_cast<Eigen::Index>(state);
        return offset(i) + slope(i) * (horizon - t);
    };
    return Obstacle{std::move(fn), os.str()};
}

void check_compatible(const Obstacle& obstacle, const Vector& xi, double horizon) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
        const double g = obstacle(horizon, static_cast<std::size_t>(i));
        if (g > xi(i)) {
            std::ostringstream os;
            os << "G(T, " << i << ") = " << g << " exceeds xi = " << xi(i);
            throw Error(ErrorCode::IncompatibleObstacle, os.str());
        }
    }
}

Matrix sample_obstacle(const Obstacle& obstacle, std::span<const double> times,
                       std::size_t states) {
    Matrix g(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(states));
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (std::size_t i = 0; i < states; ++i) {
            g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = obstacle(times[k], i);
        }
    }
    return g;
}

PenalizedSolution solve_penalized(const ChainModel& model, const Driver& driver,
                                  const Obstacle& obstacle, const Vector& xi, long penalty,
                                  std::size_t steps) {
    if (penalty < 0) throw Error(ErrorCode::BadSchedule, "penalty must be nonnegative");
    PenalizedSolution out;
    out.penalty = penalty;
    out.values = penalty == 0 ? solve_bsde(model, driver, xi, steps)
                              : solve_bsde(model, penalized_driver(driver, obstacle, penalty), xi,
                                           steps);
    const Matrix g = sample_obstacle(obstacle, out.values.times, model.states());
    out.intensity = penalty_intensity(out.values, g, penalty);
    return out;
}

std::size_t ladder_steps(double horizon, long penalty, std::size_t steps) {
    while (static_cast<double>(penalty) * horizon > static_cast<double>(steps)) steps *= 2;
    return steps;
}

RbsdeSolution solve_rbsde(const ChainModel& model, const Driver& driver, const Obstacle& obstacle,
                          const Vector& xi, std::size_t steps, double tol, long max_penalty) {
    if (!(tol > 0.0)) throw Error(ErrorCode::BadSchedule, "tol must be positive");
    check_compatible(obstacle, xi, model.horizon());
    const std::size_t base = snap_steps(model, steps);

    std::vector<LadderLevel> ladder;
    std::vector<double> gaps;
    PenalizedSolution previous;
    for (long n = 1; n <= max_penalty; n *= 2) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t level_steps = ladder_steps(model.horizon(), n, base);
        PenalizedSolution current = solve_penalized(model, driver, obstacle, xi, n, level_steps);

        LadderLevel level{n, level_steps, 0.0, 0.0, 0.0};
        if (!ladder.empty()) {
            // Levels are compared on one grid; a refined level gets its predecessor re-solved.
            if (previous.values.steps() != level_steps) {
                previous = solve_penalized(model, driver, obstacle, xi, previous.penalty, level_steps);
            }
            const Matrix diff = current.values.values - previous.values.values;
            const double gap = diff.cwiseAbs().maxCoeff();
            const double increase = diff.minCoeff();
            level.sup_gap = gap;
            level.min_increase = increase;
            gaps.push_back(gap);
        }
        level.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ladder.push_back(level);

        const bool converged = ladder.size() > 1 && level.sup_gap < tol;
        previous = std::move(current);
        if (converged) {
            const Matrix g = sample_obstacle(obstacle, previous.values.times, model.states());
            RbsdeSolution sol = finish(std::move(previous), g);
            sol.ladder = std::move(ladder);
            sol.ladder_gaps = std::move(gaps);
            return sol;
        }
    }
    std::ostringstream os;
    os << "penalization ladder reached n = " << ladder.back().penalty
       << " with sup gap " << (gaps.empty() ? 0.0 : gaps.back()) << " >= tol " << tol;
    throw Error(ErrorCode::NoConvergence, os.str());
}

RbsdeSolution solve_rbsde_at_level(const ChainModel& model, const Driver& driver,
                                   const Obstacle& obstacle, const Vector& xi, long penalty,
                                   std::size_t steps) {
    check_compatible(obstacle, xi, model.horizon());
    const auto start = std::chrono::steady_clock::now();
    const std::size_t level_steps =
        ladder_steps(model.horizon(), penalty, snap_steps(model, steps));
    PenalizedSolution level = solve_penalized(model, driver, obstacle, xi, penalty, level_steps);
    const Matrix g = sample_obstacle(obstacle, level.values.times, model.states());
    RbsdeSolution sol = finish(std::move(level), g);
    sol.ladder.push_back(LadderLevel{
        penalty, level_steps, 0.0, 0.0,
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    return sol;
}

RbsdeSolution solve_rbsde_projected(const ChainModel& model, const Driver& driver,
                                    const Obstacle& obstacle, const Vector& xi,
                                    std::size_t steps) {
    if (steps == 0) throw Error(ErrorCode::BadSchedule, "steps must be at least 1");
    check_compatible(obstacle, xi, model.horizon());
    const auto n = static_cast<Eigen::Index>(model.states());

    RbsdeSolution sol;
    sol.values.times = uniform_grid(model.horizon(), steps);
    const auto& times = sol.values.times;
    sol.values.values.resize(static_cast<Eigen::Index>(steps + 1), n);
    sol.intensity = Matrix::Zero(static_cast<Eigen::Index>(steps + 1), n);
    sol.obstacle = sample_obstacle(obstacle, times, model.states());
    sol.values.values.row(static_cast<Eigen::Index>(steps)) = xi.transpose();

    Vector u = xi;
    Vector slope(n);
    for (std::size_t k = steps; k > 0; --k) {
        const double t_hi = times[k];
        const double h = t_hi - times[k - 1];
        const Matrix& rates = model.rates_at(0.5 * (t_hi + times[k - 1]));
        slope.noalias() = rates.transpose() * u;
        for (Eigen::Index i = 0; i < n; ++i) {
            slope(i) += driver(t_hi, u(i), u, static_cast<std::size_t>(i), rates);
        }
        u += h * slope;
        const auto row = static_cast<Eigen::Index>(k - 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double push = sol.obstacle(row, i) - u(i);
            if (push > 0.0) {
                u(i) += push;
                sol.intensity(row, i) = push / h;
            }
        }
        if (!u.allFinite()) throw Error(ErrorCode::NonFinite, "projected sweep diverged");
        sol.values.values.row(row) = u.transpose();
    }
    return sol;
}

double skorokhod_residual(const RbsdeSolution& sol) {
    const auto& times = sol.values.times;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        const double worst = ((sol.values.values.row(row) - sol.obstacle.row(row)).cwiseAbs().array() *
                              sol.intensity.row(row).array())
                                 .maxCoeff();
        total += worst * (times[k + 1] - times[k]);
    }
    return total;
}

double k_total_bound(const RbsdeSolution& sol) {
    const auto& times = sol.values.times;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const auto lo = sol.intensity.row(static_cast<Eigen::Index>(k));
        const auto hi = sol.intensity.row(static_cast<Eigen::Index>(k + 1));
        total += 0.5 * (lo + hi).maxCoeff() * (times[k + 1] - times[k]);
    }
    return total;
}

std::vector<double> k_on_path(const RbsdeSolution& sol, const ChainPath& path) {
    const auto& times = sol.values.times;
    std::vector<double> k_path(times.size(), 0.0);
    auto jump = path.jumps.begin();
    std::size_t state = path.initial;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        double t = times[k];
        double acc = 0.0;
        while (jump != path.jumps.end() && jump->time < times[k + 1]) {
            acc += cell_integral(sol, k, state, t, jump->time);
            t = jump->time;
            state = jump->state;
            ++jump;
        }
        acc += cell_integral(sol, k, state, t, times[k + 1]);
        k_path[k + 1] = k_path[k] + acc;
    }
    return k_path;
}

ComparisonGap compare_rbsde(const RbsdeSolution& lower, const RbsdeSolution& upper) {
    if (lower.values.times != upper.values.times ||
        lower.values.values.cols() != upper.values.values.cols())
        throw Error(ErrorCode::GridMismatch, "comparison needs solutions on the same grid");
    ComparisonGap gap;
    gap.value_gap = (upper.values.values - lower.values.values).minCoeff();

    // The path that minimizes K - J picks the smallest intensity gap at all times.
    const Matrix d = lower.intensity - upper.intensity;
    const auto& times = lower.values.times;
    double cumulative = 0.0;
    gap.k_gap = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const auto lo = d.row(static_cast<Eigen::Index>(k));
        const auto hi = d.row(static_cast<Eigen::Index>(k + 1));
        cumulative += lo.cwiseMin(hi).minCoeff() * (times[k + 1] - times[k]);
        gap.k_gap = std::min(gap.k_gap, cumulative);
    }
    return gap;
}

DependenceTerms continuous_dependence_gap(const RbsdeInstance& a, const RbsdeInstance& b,
                                          const DependenceOptions& options) {
    if (!same_model(a.model, b.model))
        throw Error(ErrorCode::InstanceMismatch, "instances must share the chain model");
    if (a.driver.family != b.driver.family || a.driver.lipschitz_y != b.driver.lipschitz_y ||
        a.driver.lipschitz_z != b.driver.lipschitz_z)
        throw Error(ErrorCode::InstanceMismatch, "instances must share the driver f");

    const ChainModel& model = a.model;
    long penalty = options.penalty;
    if (penalty == 0) {
        const RbsdeSolution la = solve_rbsde(model, a.driver, a.obstacle, a.xi, options.steps,
                                             options.tol, options.max_penalty);
        const RbsdeSolution lb = solve_rbsde(model, b.driver, b.obstacle, b.xi, options.steps,
                                             options.tol, options.max_penalty);
        penalty = std::max(la.n_final, lb.n_final);
    }
    const RbsdeSolution sa =
        solve_rbsde_at_level(model, a.driver, a.obstacle, a.xi, penalty, options.steps);
    const RbsdeSolution sb =
        solve_rbsde_at_level(model, b.driver, b.obstacle, b.xi, penalty, options.steps);

    const auto& times = sa.values.times;
    const std::size_t nodes = times.size();
    const auto states = static_cast<Eigen::Index>(model.states());
    Vector p0 = Vector::Zero(states);
    p0(static_cast<Eigen::Index>(options.x0)) = 1.0;
    const Matrix law = forward_law(model, p0, times);

    DependenceTerms terms;
    terms.penalty = penalty;
    terms.steps = nodes - 1;

    const Matrix v = sa.values.values - sb.values.values;
    std::vector<double> energy_density(nodes, 0.0);
    for (std::size_t k = 0; k < nodes; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        double mean_sq = 0.0;
        const Matrix& rates = model.rates_at(times[k]);
        const Vector z = v.row(row).transpose();
        for (Eigen::Index i = 0; i < states; ++i) {
            mean_sq += law(row, i) * v(row, i) * v(row, i);
            energy_density[k] += law(row, i) * seminorm_sq(rates, static_cast<std::size_t>(i), z);
        }
        terms.sup_value_sq = std::max(terms.sup_value_sq, mean_sq);
    }
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        terms.z_energy += 0.5 * (energy_density[k] + energy_density[k + 1]) * (times[k + 1] - times[k]);
    }

    const Matrix dk = sa.intensity - sb.intensity;
    const auto k_tail = tail_integral_second_moment(model, p0, times, dk);
    terms.sup_k_tail_sq = *std::max_element(k_tail.begin(), k_tail.end());
    terms.lhs = terms.sup_value_sq + terms.z_energy + terms.sup_k_tail_sq;

    const Vector dxi = a.xi - b.xi;
    const auto last = static_cast<Eigen::Index>(nodes - 1);
    for (Eigen::Index i = 0; i < states; ++i) terms.xi_sq += law(last, i) * dxi(i) * dxi(i);

    Matrix dphi = Matrix::Zero(static_cast<Eigen::Index>(nodes), states);
    if (a.driver.forcing || b.driver.forcing) {
        for (std::size_t k = 0; k < nodes; ++k) {
            for (Eigen::Index i = 0; i < states; ++i) {
                const auto s = static_cast<std::size_t>(i);
                const double fa = a.driver.forcing ? a.driver.forcing(times[k], s) : 0.0;
                const double fb = b.driver.forcing ? b.driver.forcing(times[k], s) : 0.0;
                dphi(static_cast<Eigen::Index>(k), i) = std::abs(fa - fb);
            }
        }
    }
    terms.forcing_sq = tail_integral_second_moment(model, p0, times, dphi).front();

    const Matrix dg = sa.obstacle - sb.obstacle;
    const auto obstacle_stats = expectation_on_paths(
        model,
        [&](const ChainPath& path) {
            double worst = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) {
                const double d = dg(static_cast<Eigen::Index>(k),
                                    static_cast<Eigen::Index>(path.state_at(times[k])));
                worst = std::max(worst, d * d);
            }
            return worst;
        },
        options.x0, options.paths, options.seed);
    terms.obstacle_sq = obstacle_stats.mean;
    terms.rhs = terms.xi_sq + terms.forcing_sq + terms.obstacle_sq;

    const auto pathwise = expectation_on_paths(
        model,
        [&](const ChainPath& path) {
            const auto ka = k_on_path(sa, path);
            const auto kb = k_on_path(sb, path);
            double worst = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) {
                const double s = v(static_cast<Eigen::Index>(k),
                                   static_cast<Eigen::Index>(path.state_at(times[k]))) +
                                 ka[k] - kb[k];
                worst = std::max(worst, s * s);
            }
            return worst;
        },
        options.x0, options.paths, options.seed);
    terms.pathwise_lhs = pathwise.mean + terms.z_energy;
    return terms;
}

void write_csv(std::ostream& out, const RbsdeSolution& sol) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    const std::size_t n = sol.values.states();
    out << 't';
    for (std::size_t i = 1; i <= n; ++i) out << ",V_" << i;
    for (std::size_t i = 1; i <= n; ++i) out << ",k_" << i;
    out << '\n';
    for (std::size_t k = 0; k < sol.values.times.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        out << sol.values.times[k];
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) out << ',' << sol.values.values(row, i);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) out << ',' << sol.intensity(row, i);
        out << '\n';
    }
    out.precision(old_precision);
}

void write_ladder_report(std::ostream& out, const RbsdeSolution& sol) {
    for (const auto& level : sol.ladder) {
        out << "n=" << level.penalty << " steps=" << level.steps << " sup_gap=" << level.sup_gap
            << " seconds=" << level.seconds << '\n';
    }
}

}  // namespace chainbsde
