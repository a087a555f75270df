#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace chainbsde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rate matrix in force from `start` until the next segment (or the horizon).
///
/// Column convention: column i holds the jump rates out of state i, so every
/// column sums to zero and `rates * e_i` is the drift of the unit-vector chain.
struct RateSegment {
    double start = 0.0;
    Matrix rates;
};

/// Finite-state chain X_t in {e_0, ..., e_{N-1}} with a piecewise-constant
/// rate schedule on [0, T]. Immutable once built; use `validate_model`.
class ChainModel {
public:
    [[nodiscard]] std::size_t states() const noexcept { return states_; }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    /// Largest spectral norm over the schedule (the bound m on |A_t|).
    [[nodiscard]] double rate_bound() const noexcept { return rate_bound_; }
    [[nodiscard]] const std::vector<RateSegment>& schedule() const noexcept { return schedule_; }

    /// Index of the segment whose half-open interval [start, next) holds t.
    /// t at or past the horizon maps to the last segment.
    [[nodiscard]] std::size_t segment_index(double t) const noexcept;
    [[nodiscard]] const Matrix& rates_at(double t) const noexcept {
        return schedule_[segment_index(t)].rates;
    }
    /// End of segment `index` (next start, or the horizon).
    [[nodiscard]] double segment_end(std::size_t index) const noexcept;

private:
    friend ChainModel validate_model(std::vector<RateSegment> schedule, std::size_t states,
                                     double horizon);
    ChainModel() = default;

    std::size_t states_ = 0;
    double horizon_ = 0.0;
    double rate_bound_ = 0.0;
    std::vector<RateSegment> schedule_;
};

/// Checks the schedule and computes the rate bound.
///
/// Throws EmptySchedule, BadSchedule (dimensions, T <= 0, break times not
/// strictly increasing from 0 inside [0, T)), BadColumnSum (|column sum| >
/// 1e-12) or NegativeRate (negative off-diagonal entry).
ChainModel validate_model(std::vector<RateSegment> schedule, std::size_t states, double horizon);

/// Convenience overload for a time-homogeneous chain.
ChainModel constant_model(const Matrix& rates, double horizon);

struct Jump {
    double time = 0.0;
    std::size_t state = 0;
};

/// One realization of the chain on [0, T]: start state plus ordered jumps.
struct ChainPath {
    std::size_t initial = 0;
    std::vector<Jump> jumps;
    double horizon = 0.0;

    /// State held at time t (right-continuous).
    [[nodiscard]] std::size_t state_at(double t) const noexcept;
    /// State just before t.
    [[nodiscard]] std::size_t state_before(double t) const noexcept;
    [[nodiscard]] std::size_t terminal() const noexcept {
        return jumps.empty() ? initial : jumps.back().state;
    }
};

/// Density of the predictable bracket d<X,X>_t at X_{t-} = e_state.
struct PsiMatrix {
    Matrix entries;
    std::size_t state = 0;
};

/// diag(A e_i) - diag(e_i) A' - A diag(e_i).
[[nodiscard]] Matrix psi_from_rates(const Matrix& rates, std::size_t state);
[[nodiscard]] PsiMatrix psi(const ChainModel& model, double t, std::size_t state);

/// ||C||^2_{X_t} at X_t = e_state, via sum_{j != i} A_ji (C_j - C_i)^2.
[[nodiscard]] double seminorm_sq(const Matrix& rates, std::size_t state, const Vector& c);
[[nodiscard]] double seminorm_sq(const ChainModel& model, double t, std::size_t state,
                                 const Vector& c);

/// Moore-Penrose pseudoinverse of a symmetric matrix by eigendecomposition.
/// Eigenvalues below 1e-12 * max|eigenvalue| are treated as zero.
/// Throws NotSymmetric.
[[nodiscard]] Matrix pseudoinverse(const Matrix& q);

/// Largest max-entry violation of the four Moore-Penrose identities.
[[nodiscard]] double moore_penrose_defect(const Matrix& q, const Matrix& q_dagger);

[[nodiscard]] double spectral_norm(const Matrix& m);

/// max over segments and states of c_z * |Psi^dagger|_2 * sqrt(6 m).
/// Values below one mean the z-Lipschitz smallness condition holds.
[[nodiscard]] double assumption_margin(const ChainModel& model, double c_z);

/// Per-path random stream derived from (seed, stream index); the same pair
/// always yields the same sequence regardless of evaluation order.
[[nodiscard]] std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

/// Exact simulation: exponential holding times restarted at every schedule
/// break, jump target j drawn with probability A_ji / (-A_ii).
[[nodiscard]] ChainPath simulate_path(const ChainModel& model, std::size_t x0,
                                      std::uint64_t seed, std::uint64_t stream = 0);
[[nodiscard]] ChainPath simulate_path(const ChainModel& model, std::size_t x0,
                                      std::mt19937_64& rng);

/// Uniform partition of [0, horizon] into `steps` cells.
[[nodiscard]] std::vector<double> uniform_grid(double horizon, std::size_t steps);

/// Integral of A_s X_s over [a, b] along the path, exact.
[[nodiscard]] Vector compensator(const ChainModel& model, const ChainPath& path, double a,
                                 double b);

/// M over each cell of `grid`: jump part minus compensator.
[[nodiscard]] std::vector<Vector> martingale_increments(const ChainModel& model,
                                                        const ChainPath& path,
                                                        std::span<const double> grid);

/// Law of X_t on `grid` from the initial law p0 (solves p' = A p by RK4).
/// Row k holds P(X_{t_k} = e_i).
[[nodiscard]] Matrix forward_law(const ChainModel& model, const Vector& p0,
                                 std::span<const double> grid);

/// For d given at the grid nodes (row k, column state; linear in time between
/// nodes), returns E[(int_{t_k}^T d(s, X_s) ds)^2] for every node k under the
/// law started from p0. Exact up to the RK4 error of the moment equations.
[[nodiscard]] std::vector<double> tail_integral_second_moment(const ChainModel& model,
                                                              const Vector& p0,
                                                              std::span<const double> grid,
                                                              const Matrix& d);

}  // namespace chainbsde
