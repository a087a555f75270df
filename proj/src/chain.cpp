#include "chainbsde/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chainbsde/error.hpp"

namespace chainbsde {

namespace {

constexpr double kColumnSumTol = 1e-12;

std::string describe(const char* what, std::size_t segment, std::size_t col) {
    std::ostringstream os;
    os << what << " in segment " << segment << ", column " << col;
    return os.str();
}

}  // namespace

std::size_t ChainModel::segment_index(double t) const noexcept {
    // Last segment whose start is <= t.
    auto it = std::upper_bound(schedule_.begin(), schedule_.end(), t,
                               [](double value, const RateSegment& s) { return value < s.start; });
    if (it == schedule_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(schedule_.begin(), it)) - 1;
}

double ChainModel::segment_end(std::size_t index) const noexcept {
    return index + 1 < schedule_.size() ? schedule_[index + 1].start : horizon_;
}

ChainModel validate_model(std::vector<RateSegment> schedule, std::size_t states, double horizon) {
    if (schedule.empty()) throw Error(ErrorCode::EmptySchedule, "rate schedule has no segments");
    if (states == 0) throw Error(ErrorCode::BadSchedule, "state count must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw Error(ErrorCode::BadSchedule, "horizon must be positive and finite");
    if (schedule.front().start != 0.0)
        throw Error(ErrorCode::BadSchedule, "first segment must start at t = 0");

    double bound = 0.0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const auto& seg = schedule[s];
        if (s > 0 && !(seg.start > schedule[s - 1].start))
            throw Error(ErrorCode::BadSchedule, "break times must be strictly increasing");
        if (seg.start >= horizon)
            throw Error(ErrorCode::BadSchedule, "break times must lie in [0, T)");
        const auto n = static_cast<Eigen::Index>(states);
        if (seg.rates.rows() != n || seg.rates.cols() != n)
            throw Error(ErrorCode::DimensionMismatch, "rate matrix must be N x N");
        if (!seg.rates.allFinite())
            throw Error(ErrorCode::BadSchedule, "rate matrix has non-finite entries");
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i != j && seg.rates(i, j) < 0.0)
                    throw Error(ErrorCode::NegativeRate,
                                describe("negative off-diagonal rate", s, j));
            }
            if (std::abs(seg.rates.col(j).sum()) > kColumnSumTol)
                throw Error(ErrorCode::BadColumnSum, describe("column does not sum to zero", s, j));
        }
        bound = std::max(bound, spectral_norm(seg.rates));
    }

    ChainModel model;
    model.states_ = states;
    model.horizon_ = horizon;
    model.rate_bound_ = bound;
    model.schedule_ = std::move(schedule);
    return model;
}

ChainModel constant_model(const Matrix& rates, double horizon) {
    return validate_model({RateSegment{0.0, rates}}, static_cast<std::size_t>(rates.rows()),
                          horizon);
}

std::size_t ChainPath::state_at(double t) const noexcept {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                               [](double value, const Jump& j) { return value < j.time; });
    return it == jumps.begin() ? initial : std::prev(it)->state;
}

std::size_t ChainPath::state_before(double t) const noexcept {
    auto it = std::lower_bound(jumps.begin(), jumps.end(), t,
                               [](const Jump& j, double value) { return j.time < value; });
    return it == jumps.begin() ? initial : std::prev(it)->state;
}

Matrix psi_from_rates(const Matrix& rates, std::size_t state) {
    const auto n = rates.rows();
    const auto i = static_cast<Eigen::Index>(state);
    Vector x = Vector::Zero(n);
    x(i) = 1.0;
    Matrix diag_x = x.asDiagonal();
    Matrix drift = (rates * x).asDiagonal();
    return drift - diag_x * rates.transpose() - rates * diag_x;
}

PsiMatrix psi(const ChainModel& model, double t, std::size_t state) {
    return PsiMatrix{psi_from_rates(model.rates_at(t), state), state};
}

double seminorm_sq(const Matrix& rates, std::size_t state, const Vector& c) {
    const auto i = static_cast<Eigen::Index>(state);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < rates.rows(); ++j) {
        if (j == i) continue;
        const double d = c(j) - c(i);
        sum += rates(j, i) * d * d;
    }
    return sum;
}

double seminorm_sq(const ChainModel& model, double t, std::size_t state, const Vector& c) {
    return seminorm_sq(model.rates_at(t), state, c);
}

Matrix pseudoinverse(const Matrix& q) {
    if (q.rows() != q.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorCode::NotSymmetric, "pseudoinverse requires a symmetric matrix");

    Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
    const Vector& lambda = eig.eigenvalues();
    const double cutoff = 1e-12 * lambda.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        if (std::abs(lambda(k)) > cutoff) inv(k) = 1.0 / lambda(k);
    }
    const Matrix& v = eig.eigenvectors();
    return v * inv.asDiagonal() * v.transpose();
}

double moore_penrose_defect(const Matrix& q, const Matrix& q_dagger) {
    const Matrix qqd = q * q_dagger;
    const Matrix qdq = q_dagger * q;
    double defect = (qqd * q - q).cwiseAbs().maxCoeff();
    defect = std::max(defect, (qdq * q_dagger - q_dagger).cwiseAbs().maxCoeff());
    defect = std::max(defect, (qqd.transpose() - qqd).cwiseAbs().maxCoeff());
    defect = std::max(defect, (qdq.transpose() - qdq).cwiseAbs().maxCoeff());
    return defect;
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.transpose() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double assumption_margin(const ChainModel& model, double c_z) {
    if (c_z == 0.0) return 0.0;
    // Psi depends on t only through A_t, which is constant on each segment.
    double worst = 0.0;
    for (const auto& seg : model.schedule()) {
        for (std::size_t i = 0; i < model.states(); ++i) {
            worst = std::max(worst, spectral_norm(pseudoinverse(psi_from_rates(seg.rates, i))));
        }
    }
    return c_z * worst * std::sqrt(6.0 * model.rate_bound());
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

ChainPath simulate_path(const ChainModel& model, std::size_t x0, std::uint64_t seed,
                        std::uint64_t stream) {
    auto rng = substream(seed, stream);
    return simulate_path(model, x0, rng);
}

ChainPath simulate_path(const ChainModel& model, std::size_t x0, std::mt19937_64& rng) {
    ChainPath path;
    path.initial = x0;
    path.horizon = model.horizon();
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::size_t state = x0;
    double t = 0.0;
    std::size_t seg = 0;
    const auto& schedule = model.schedule();
    while (seg < schedule.size()) {
        const Matrix& a = schedule[seg].rates;
        const double end = model.segment_end(seg);
        const auto i = static_cast<Eigen::Index>(state);
        const double leave = -a(i, i);
        if (leave <= 0.0) {
            ++seg;
            t = end;
            continue;
        }
        std::exponential_distribution<double> holding(leave);
        const double next = t + holding(rng);
        if (next >= end) {
            // Memoryless: restart the clock under the next segment's rates.
            ++seg;
            t = end;
            continue;
        }
        const double pick = uniform(rng) * leave;
        double acc = 0.0;
        std::size_t target = state;
        for (Eigen::Index j = 0; j < a.rows(); ++j) {
            if (j == i || a(j, i) <= 0.0) continue;
            acc += a(j, i);
            target = static_cast<std::size_t>(j);
            if (pick < acc) break;
        }
        t = next;
        state = target;
        path.jumps.push_back(Jump{t, state});
    }
    return path;
}

std::vector<double> uniform_grid(double horizon, std::size_t steps) {
    std::vector<double> grid(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
    grid.back() = horizon;
    return grid;
}

Vector compensator(const ChainModel& model, const ChainPath& path, double a, double b) {
    Vector total = Vector::Zero(static_cast<Eigen::Index>(model.states()));
    b = std::min(b, model.horizon());
    if (!(b > a)) return total;

    auto jump = std::upper_bound(path.jumps.begin(), path.jumps.end(), a,
                                 [](double value, const Jump& j) { return value < j.time; });
    std::size_t state = jump == path.jumps.begin() ? path.initial : std::prev(jump)->state;
    std::size_t seg = model.segment_index(a);
    double t = a;
    while (t < b) {
        double next = std::min(b, model.segment_end(seg));
        if (jump != path.jumps.end()) next = std::min(next, jump->time);
        total += (next - t) * model.schedule()[seg].rates.col(static_cast<Eigen::Index>(state));
        t = next;
        if (jump != path.jumps.end() && jump->time <= t) {
            state = jump->state;
            ++jump;
        }
        if (seg + 1 < model.schedule().size() && model.segment_end(seg) <= t) ++seg;
    }
    return total;
}

std::vector<Vector> martingale_increments(const ChainModel& model, const ChainPath& path,
                                          std::span<const double> grid) {
    std::vector<Vector> out;
    if (grid.size() < 2) return out;
    out.reserve(grid.size() - 1);
    const auto n = static_cast<Eigen::Index>(model.states());
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        Vector dm = -compensator(model, path, grid[k], grid[k + 1]);
        const std::size_t before = path.state_at(grid[k]);
        const std::size_t after = path.state_at(grid[k + 1]);
        if (before != after) {
            Vector dx = Vector::Zero(n);
            dx(static_cast<Eigen::Index>(after)) += 1.0;
            dx(static_cast<Eigen::Index>(before)) -= 1.0;
            dm += dx;
        }
        out.push_back(std::move(dm));
    }
    return out;
}

Matrix forward_law(const ChainModel& model, const Vector& p0, std::span<const double> grid) {
    const auto n = static_cast<Eigen::Index>(model.states());
    Matrix law(static_cast<Eigen::Index>(grid.size()), n);
    Vector p = p0;
    law.row(0) = p.transpose();
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double h = grid[k + 1] - grid[k];
        const Matrix& a = model.rates_at(0.5 * (grid[k] + grid[k + 1]));
        const Vector k1 = a * p;
        const Vector k2 = a * (p + 0.5 * h * k1);
        const Vector k3 = a * (p + 0.5 * h * k2);
        const Vector k4 = a * (p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        law.row(static_cast<Eigen::Index>(k + 1)) = p.transpose();
    }
    return law;
}

std::vector<double> tail_integral_second_moment(const ChainModel& model, const Vector& p0,
                                                std::span<const double> grid, const Matrix& d) {
    // w_i(t) = E[int_t^T d | X_t = i] and q_i(t) = E[(int_t^T d)^2 | X_t = i] solve
    //   -w' = d + A'w,   -q' = 2 d w + A'q,   w(T) = q(T) = 0.
    const auto n = static_cast<Eigen::Index>(model.states());
    const std::size_t nodes = grid.size();
    std::vector<Vector> q_at(nodes, Vector::Zero(n));
    Vector w = Vector::Zero(n);
    Vector q = Vector::Zero(n);
    auto rhs = [](const Matrix& at, const Vector& dd, const Vector& ww, const Vector& qq,
                  Vector& dw, Vector& dq) {
        dw = dd + at * ww;
        dq = 2.0 * dd.cwiseProduct(ww) + at * qq;
    };
    Vector dw1, dq1, dw2, dq2, dw3, dq3, dw4, dq4;
    for (std::size_t k = nodes - 1; k > 0; --k) {
        const double h = grid[k] - grid[k - 1];
        const Matrix at = model.rates_at(0.5 * (grid[k] + grid[k - 1])).transpose();
        const Vector d_hi = d.row(static_cast<Eigen::Index>(k)).transpose();
        const Vector d_lo = d.row(static_cast<Eigen::Index>(k - 1)).transpose();
        const Vector d_mid = 0.5 * (d_hi + d_lo);
        rhs(at, d_hi, w, q, dw1, dq1);
        rhs(at, d_mid, w + 0.5 * h * dw1, q + 0.5 * h * dq1, dw2, dq2);
        rhs(at, d_mid, w + 0.5 * h * dw2, q + 0.5 * h * dq2, dw3, dq3);
        rhs(at, d_lo, w + h * dw3, q + h * dq3, dw4, dq4);
        w += h / 6.0 * (dw1 + 2.0 * dw2 + 2.0 * dw3 + dw4);
        q += h / 6.0 * (dq1 + 2.0 * dq2 + 2.0 * dq3 + dq4);
        q_at[k - 1] = q;
    }
    const Matrix law = forward_law(model, p0, grid);
    std::vector<double> out(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        out[k] = law.row(static_cast<Eigen::Index>(k)).dot(q_at[k]);
    }
    return out;
}

}  // namespace chainbsde
