#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "chainbsde/chain.hpp"

namespace chainbsde {

/// f(t, y, z) at X_t = e_state. `rates` is A_t, so the driver can evaluate
/// the semi-norm of z without holding the model.
using DriverFn =
    std::function<double(double t, double y, const Vector& z, std::size_t state, const Matrix& rates)>;
/// Additive forcing phi(t) at X_t = e_state.
using ForcingFn = std::function<double(double t, std::size_t state)>;

/// Markovian BSDE coefficient with declared Lipschitz constants
///   |f(t,y1,z1) - f(t,y2,z2)| <= lipschitz_y |y1-y2| + lipschitz_z ||z1-z2||_{X_t}.
///
/// `family` is a canonical description of `eval` (family name plus
/// parameters); two drivers with equal tags share the same `eval`.
struct Driver {
    DriverFn eval;
    double lipschitz_y = 0.0;
    double lipschitz_z = 0.0;
    ForcingFn forcing;
    std::string family;

    double operator()(double t, double y, const Vector& z, std::size_t state,
                      const Matrix& rates) const {
        double value = eval(t, y, z, state, rates);
        if (forcing) value += forcing(t, state);
        return value;
    }
};

[[nodiscard]] Driver zero_driver();
[[nodiscard]] Driver constant_driver(double c);
/// f = a*y.
[[nodiscard]] Driver linear_driver(double a);
/// f = a*y + b*||z||_{X_t} + alpha_i + beta_i * t.
[[nodiscard]] Driver affine_driver(double a, double b, Vector alpha, Vector beta);
[[nodiscard]] Driver with_forcing(Driver driver, ForcingFn forcing);

/// Largest ratio |f1 - f2| / (c_y |y1 - y2| + c_z ||z1 - z2||) over random
/// probes; at most one (plus rounding) when the declared constants are valid.
[[nodiscard]] double lipschitz_probe(const ChainModel& model, const Driver& driver,
                                     std::size_t probes, std::uint64_t seed);

/// Backward solution on a uniform grid: row k of `values` is u(t_k), so that
/// Y_t = u_{X_t}(t). The martingale integrand is Z(t) = u(t).
struct ValueGrid {
    std::vector<double> times;
    Matrix values;

    [[nodiscard]] std::size_t steps() const noexcept { return times.size() - 1; }
    [[nodiscard]] std::size_t states() const noexcept {
        return static_cast<std::size_t>(values.cols());
    }
    [[nodiscard]] double horizon() const noexcept { return times.back(); }
    [[nodiscard]] Vector z(std::size_t node) const {
        return values.row(static_cast<Eigen::Index>(node)).transpose();
    }
    /// Linear interpolation in time.
    [[nodiscard]] double at(double t, std::size_t state) const;
};

/// Number of uniform steps >= `steps` that puts every schedule break on a
/// grid node, trying multiples up to 64x. Falls back to `steps`.
[[nodiscard]] std::size_t snap_steps(const ChainModel& model, std::size_t steps);

/// Classical RK4 backward sweep of u_i' = -f(t, u_i, u, i) - (A_t' u)_i,
/// u(T) = xi. A_t is frozen at each cell midpoint. Throws NonFinite.
[[nodiscard]] ValueGrid solve_bsde(const ChainModel& model, const Driver& driver, const Vector& xi,
                                   std::size_t steps);

/// First-order explicit backward Euler sweep of the same system.
[[nodiscard]] ValueGrid solve_bsde_euler(const ChainModel& model, const Driver& driver,
                                         const Vector& xi, std::size_t steps);

/// CSV with header `t,<prefix>_1,...,<prefix>_N`, full double precision.
void write_csv(std::ostream& out, const ValueGrid& grid, std::string_view prefix = "u");

/// Solution sampled along a path at the grid nodes.
struct PathEvaluation {
    std::vector<double> y;         ///< Y_{t_k} = u_{X_{t_k}}(t_k)
    std::vector<double> integral;  ///< int_0^{t_k} Z' dM with Z = u(t_j) on cell j
};

[[nodiscard]] PathEvaluation evaluate_on_path(const ChainModel& model, const ValueGrid& sol,
                                              const ChainPath& path);

/// max_k |Y_{t_k} - (xi_{X_T} + int_{t_k}^T f ds - int_{t_k}^T Z' dM)| along
/// the path, with f frozen at each cell's left node and integrated over the
/// time spent in each state.
[[nodiscard]] double residual_check(const ChainModel& model, const ValueGrid& sol,
                                    const ChainPath& path, const Driver& driver, const Vector& xi);

}  // namespace chainbsde
