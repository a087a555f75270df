#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "chainbsde/bsde.hpp"
#include "chainbsde/chain.hpp"

namespace chainbsde {

/// Lower barrier G(t, state).
using ObstacleFn = std::function<double(double t, std::size_t state)>;

struct Obstacle {
    ObstacleFn value;
    std::string family;

    double operator()(double t, std::size_t state) const { return value(t, state); }
};

/// Constant -1e6: never active for data of ordinary size.
[[nodiscard]] Obstacle no_obstacle();
[[nodiscard]] Obstacle constant_obstacle(double level);
/// G_i(t) = offset_i + slope_i * (T - t).
[[nodiscard]] Obstacle affine_obstacle(Vector offset, Vector slope, double horizon);

/// Throws IncompatibleObstacle unless G(T, i) <= xi_i for every state.
void check_compatible(const Obstacle& obstacle, const Vector& xi, double horizon);

/// G sampled at the nodes of `times`, one column per state.
[[nodiscard]] Matrix sample_obstacle(const Obstacle& obstacle, std::span<const double> times,
                                     std::size_t states);

struct PenalizedSolution {
    ValueGrid values;   ///< u^n
    Matrix intensity;   ///< n (u^n - G)^-
    long penalty = 0;
};

/// BSDE with driver f + n (y - G)^-. n = 0 reproduces solve_bsde.
[[nodiscard]] PenalizedSolution solve_penalized(const ChainModel& model, const Driver& driver,
                                                const Obstacle& obstacle, const Vector& xi,
                                                long penalty, std::size_t steps);

struct LadderLevel {
    long penalty = 0;
    std::size_t steps = 0;
    double sup_gap = 0.0;       ///< sup |u^n - u^{n/2}| on shared nodes (0 for the first level)
    double min_increase = 0.0;  ///< min (u^n - u^{n/2}) on shared nodes (0 for the first level)
    double seconds = 0.0;
};

/// Reflected solution (V, Z = V, K) on a uniform grid.
///
/// V is the last penalization level lifted onto the obstacle, V = max(u^n, G);
/// the lift is at most intensity / n. Pathwise K_t = int_0^t k_{X_s}(s) ds,
/// with k linear in time between nodes.
struct RbsdeSolution {
    ValueGrid values;
    Matrix intensity;
    Matrix obstacle;  ///< G at the grid nodes
    long n_final = 0;
    std::vector<LadderLevel> ladder;
    std::vector<double> ladder_gaps;

    /// min over ladder levels of min_increase; >= 0 up to rounding when the
    /// levels increase with n.
    [[nodiscard]] double min_level_increase() const;
};

/// Steps used at penalty level n: `steps` doubled until n * T / steps <= 1.
[[nodiscard]] std::size_t ladder_steps(double horizon, long penalty, std::size_t steps);

/// Penalization ladder n = 1, 2, 4, ..., max_penalty, refining the grid with
/// n, stopping once consecutive levels differ by less than tol in sup norm.
/// Throws IncompatibleObstacle, NoConvergence, NonFinite.
[[nodiscard]] RbsdeSolution solve_rbsde(const ChainModel& model, const Driver& driver,
                                        const Obstacle& obstacle, const Vector& xi,
                                        std::size_t steps, double tol, long max_penalty = 4096);

/// One penalty level on the ladder's grid for that level.
[[nodiscard]] RbsdeSolution solve_rbsde_at_level(const ChainModel& model, const Driver& driver,
                                                 const Obstacle& obstacle, const Vector& xi,
                                                 long penalty, std::size_t steps);

/// Independent first-order scheme: explicit backward Euler step, then
/// u_i <- max(u_i, G(t, i)); the projection amount is the K increment.
[[nodiscard]] RbsdeSolution solve_rbsde_projected(const ChainModel& model, const Driver& driver,
                                                  const Obstacle& obstacle, const Vector& xi,
                                                  std::size_t steps);

/// sum over cells of max_i |V_i - G_i| k_i dt at the left node: a bound on
/// |int (V - G) dK| valid for every path.
[[nodiscard]] double skorokhod_residual(const RbsdeSolution& sol);

/// Upper bound over paths of K_T: sum over cells of max_i k_i dt.
[[nodiscard]] double k_total_bound(const RbsdeSolution& sol);

/// K at every grid node along the path.
[[nodiscard]] std::vector<double> k_on_path(const RbsdeSolution& sol, const ChainPath& path);

struct ComparisonGap {
    double value_gap = 0.0;  ///< min over nodes of V_upper - V_lower
    double k_gap = 0.0;      ///< min over nodes and paths of K_lower - K_upper (lower bound)
};

/// Gaps for data ordered as lower <= upper. Throws GridMismatch.
[[nodiscard]] ComparisonGap compare_rbsde(const RbsdeSolution& lower, const RbsdeSolution& upper);

struct RbsdeInstance {
    ChainModel model;
    Driver driver;
    Obstacle obstacle;
    Vector xi;
};

struct DependenceOptions {
    std::size_t steps = 1000;
    double tol = 1e-3;
    long max_penalty = 4096;
    /// Solve both instances at this level; 0 runs the ladder on both and
    /// aligns them at the larger final level.
    long penalty = 0;
    std::size_t x0 = 0;
    std::size_t paths = 2000;
    std::uint64_t seed = 1;
};

/// Both sides of the continuous-dependence bound for two instances that
/// share the model and driver, plus the pathwise sup form.
struct DependenceTerms {
    double sup_value_sq = 0.0;   ///< sup_t E|v_t|^2
    double z_energy = 0.0;       ///< E int ||z||^2 dt
    double sup_k_tail_sq = 0.0;  ///< sup_t E|k_T - k_t|^2
    double lhs = 0.0;
    double xi_sq = 0.0;          ///< E|xi_1 - xi_2|^2
    double forcing_sq = 0.0;     ///< E(int |phi_1 - phi_2| dt)^2
    double obstacle_sq = 0.0;    ///< E sup_t |G_1 - G_2|^2
    double rhs = 0.0;
    double pathwise_lhs = 0.0;   ///< E sup_t |v_t + k_t|^2 + E int ||z||^2 dt
    long penalty = 0;
    std::size_t steps = 0;
};

/// Throws InstanceMismatch when the instances differ in the model or in f.
[[nodiscard]] DependenceTerms continuous_dependence_gap(const RbsdeInstance& a,
                                                        const RbsdeInstance& b,
                                                        const DependenceOptions& options);

/// CSV `t,V_1..V_N,k_1..k_N`.
void write_csv(std::ostream& out, const RbsdeSolution& sol);
/// One line per ladder level: n, steps, sup-gap, wall time.
void write_ladder_report(std::ostream& out, const RbsdeSolution& sol);

}  // namespace chainbsde
