#pragma once

#include <cstdint>
#include <optional>

#include "chainbsde/config.hpp"
#include "chainbsde/rbsde.hpp"

namespace chainbsde {

/// Constraints for random instances of the affine family
///   f(t, y, z) = a y + b ||z||_{X_t} + alpha_i + beta_i t.
struct GeneratorConstraints {
    std::size_t min_states = 2;
    std::size_t max_states = 5;
    double rate_scale = 1.0;
    double horizon = 1.0;
    double lipschitz_y_cap = 0.5;
    /// b is drawn so that assumption_margin(model, |b|) is below this.
    double margin_target = 0.9;
    /// Fixes b instead of drawing it.
    std::optional<double> z_lipschitz;
    /// Retry until the unreflected solution dips below the obstacle.
    bool obstacle_active = false;
    bool linear_driver = false;  ///< forces b = alpha = beta = 0
};

[[nodiscard]] GeneratorConstraints constraints_from(const GeneratorSpec& spec);

/// A generated instance together with the specs that rebuild it.
struct GeneratedInstance {
    ModelSpec model_spec;
    DriverSpec driver_spec;
    ObstacleSpec obstacle_spec;
    std::vector<double> terminal;
    double margin = 0.0;
    std::uint64_t seed = 0;

    [[nodiscard]] RbsdeInstance build() const;
};

/// Deterministic in (seed, constraints). Throws ConstraintUnsatisfiable.
[[nodiscard]] GeneratedInstance generate_instance(std::uint64_t seed,
                                                  const GeneratorConstraints& constraints);

/// Data ordered for comparison: upper has driver f + delta (delta >= 0) and
/// terminal xi + eta (eta >= 0.05); model and obstacle are shared. With
/// `invert` the terminal values are swapped, so lower.xi > upper.xi.
struct GeneratedPair {
    GeneratedInstance lower;
    GeneratedInstance upper;
};

[[nodiscard]] GeneratedPair generate_pair(std::uint64_t seed,
                                          const GeneratorConstraints& constraints,
                                          bool invert = false);

}  // namespace chainbsde
