#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainbsde/bsde.hpp"
#include "chainbsde/chain.hpp"
#include "chainbsde/rbsde.hpp"

namespace chainbsde {

struct ModelSpec {
    std::size_t states = 2;
    double horizon = 1.0;
    std::vector<RateSegment> schedule;
};

/// Families: "zero", "constant" (c), "linear" (a), "affine" (a, b, alpha, beta).
struct DriverSpec {
    std::string family = "zero";
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
};

/// Families: "none", "constant" (level), "affine" (offset, slope).
struct ObstacleSpec {
    std::string family = "none";
    double level = 0.0;
    std::vector<double> offset;
    std::vector<double> slope;
};

struct SolverSpec {
    std::size_t steps = 1000;
    double tol = 1e-3;
    long ladder_cap = 4096;
};

struct MonteCarloSpec {
    std::size_t paths = 100000;
    std::size_t estimate_paths = 2000;
    std::uint64_t seed = 20240601;
};

struct GeneratorSpec {
    std::size_t min_states = 2;
    std::size_t max_states = 5;
    double rate_scale = 1.0;
    double horizon = 1.0;
    double lipschitz_y_cap = 0.5;
    double margin_target = 0.9;
    std::size_t pairs = 50;
    std::size_t pool = 20;
    bool invert_comparison = false;
};

struct ExperimentConfig {
    ModelSpec model;
    DriverSpec driver;
    ObstacleSpec obstacle;
    std::vector<double> terminal;
    std::size_t initial_state = 0;
    SolverSpec solver;
    MonteCarloSpec monte_carlo;
    GeneratorSpec generator;
    std::vector<std::string> suites;
};

/// Throws ConfigError with the offending key in the message.
[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& j);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& config);
[[nodiscard]] nlohmann::json to_json(const ModelSpec& spec);
[[nodiscard]] nlohmann::json to_json(const DriverSpec& spec);
[[nodiscard]] nlohmann::json to_json(const ObstacleSpec& spec);

[[nodiscard]] ChainModel build_model(const ModelSpec& spec);
[[nodiscard]] Driver build_driver(const DriverSpec& spec, std::size_t states);
[[nodiscard]] Obstacle build_obstacle(const ObstacleSpec& spec, std::size_t states, double horizon);
[[nodiscard]] Vector build_terminal(const std::vector<double>& terminal, std::size_t states);

}  // namespace chainbsde
