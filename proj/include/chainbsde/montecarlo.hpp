#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "chainbsde/chain.hpp"

namespace chainbsde {

/// Mean and standard error of a per-path sample.
struct SampleStats {
    std::size_t paths = 0;
    double mean = 0.0;
    double std_error = 0.0;  ///< sample standard deviation / sqrt(paths)
    std::uint64_t seed = 0;
};

/// Fixed-order reduction of `samples`.
[[nodiscard]] SampleStats summarize(std::span<const double> samples, std::uint64_t seed);

/// |observed - expected| / error with 0/0 read as 0 and x/0 as infinity.
[[nodiscard]] double zscore(double difference, double error);

/// Path p always uses substream(seed, p).
using PathFunctional = std::function<double(const ChainPath&)>;

[[nodiscard]] SampleStats expectation_on_paths(const ChainModel& model,
                                               const PathFunctional& functional, std::size_t x0,
                                               std::size_t paths, std::uint64_t seed);

/// Predictable integrand Z(t, X_{t-}).
using ZField = std::function<Vector(double t, std::size_t state)>;

/// Stochastic integral int_0^T Z' dM along the path with Z frozen at the left
/// node of each grid cell (state-dependence follows X_{t-}); jumps are
/// applied at their exact times. Also returns int_0^T ||Z||^2_{X_t} dt.
struct PathIntegral {
    double integral = 0.0;
    double energy = 0.0;
};
[[nodiscard]] PathIntegral integrate_on_path(const ChainModel& model, const ZField& z,
                                             const ChainPath& path,
                                             std::span<const double> grid);

struct IsometryResult {
    SampleStats lhs;   ///< (int Z' dM)^2
    SampleStats rhs;   ///< int ||Z||^2 dt
    double zscore = 0.0;  ///< |lhs - rhs| over the standard error of the paired difference
};

[[nodiscard]] IsometryResult isometry_check(const ChainModel& model, const ZField& z,
                                            std::size_t x0, std::size_t paths,
                                            std::span<const double> grid, std::uint64_t seed);

/// Compensator density used by bracket_check; the default is `psi_from_rates`.
using PsiFn = std::function<Matrix(const Matrix& rates, std::size_t state)>;

struct BracketResult {
    Matrix mean;       ///< Monte Carlo mean of [X,X]_T - <X,X>_T
    Matrix std_error;
    Matrix zscores;
    double max_zscore = 0.0;
};

[[nodiscard]] BracketResult bracket_check(const ChainModel& model, std::size_t x0,
                                          std::size_t paths, std::uint64_t seed,
                                          const PsiFn& psi_fn = psi_from_rates);

}  // namespace chainbsde
