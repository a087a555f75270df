#include "chainbsde/config.hpp"

#include <fstream>

#include "chainbsde/error.hpp"

namespace chainbsde {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
    throw Error(ErrorCode::ConfigError, message);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(std::string("key '") + key + "': " + e.what());
    }
}

Matrix parse_matrix(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n) config_error(where + ": expected " + std::to_string(n) + " rows");
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const json& row = j[r];
        if (!row.is_array() || row.size() != n)
            config_error(where + ": row " + std::to_string(r) + " must have " + std::to_string(n) + " entries");
        for (std::size_t c = 0; c < n; ++c) {
            if (!row[c].is_number()) config_error(where + ": entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
        }
    }
    return m;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Vector to_vector(const std::vector<double>& v, std::size_t states, const char* what) {
    if (v.size() != states)
        config_error(std::string(what) + " must have one entry per state");
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ModelSpec parse_model(const json& j) {
    ModelSpec spec;
    spec.states = get_or<std::size_t>(j, "states", 0);
    spec.horizon = get_or<double>(j, "horizon", 1.0);
    if (spec.states == 0) config_error("model.states must be a positive integer");
    if (!j.contains("schedule") || !j["schedule"].is_array())
        config_error("model.schedule must be an array of {start, rates}");
    for (const json& seg : j["schedule"]) {
        spec.schedule.push_back(RateSegment{get_or<double>(seg, "start", 0.0),
                                            parse_matrix(seg.value("rates", json()), spec.states,
                                                         "model.schedule.rates")});
    }
    return spec;
}

DriverSpec parse_driver(const json& j) {
    DriverSpec spec;
    spec.family = get_or<std::string>(j, "family", "zero");
    spec.a = get_or<double>(j, "a", 0.0);
    spec.b = get_or<double>(j, "b", 0.0);
    spec.c = get_or<double>(j, "c", 0.0);
    spec.alpha = get_or<std::vector<double>>(j, "alpha", {});
    spec.beta = get_or<std::vector<double>>(j, "beta", {});
    if (spec.family != "zero" && spec.family != "constant" && spec.family != "linear" &&
        spec.family != "affine")
        config_error("unknown driver family '" + spec.family + "'");
    return spec;
}

ObstacleSpec parse_obstacle(const json& j) {
    ObstacleSpec spec;
    spec.family = get_or<std::string>(j, "family", "none");
    spec.level = get_or<double>(j, "level", 0.0);
    spec.offset = get_or<std::vector<double>>(j, "offset", {});
    spec.slope = get_or<std::vector<double>>(j, "slope", {});
    if (spec.family != "none" && spec.family != "constant" && spec.family != "affine")
        config_error("unknown obstacle family '" + spec.family + "'");
    return spec;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) config_error("config root must be an object");
    ExperimentConfig config;
    if (!j.contains("model")) config_error("missing 'model' table");
    config.model = parse_model(j["model"]);
    if (j.contains("driver")) config.driver = parse_driver(j["driver"]);
    if (j.contains("obstacle")) config.obstacle = parse_obstacle(j["obstacle"]);
    config.terminal = get_or<std::vector<double>>(j, "terminal",
                                                  std::vector<double>(config.model.states, 0.0));
    config.initial_state = get_or<std::size_t>(j, "initial_state", 0);
    if (config.initial_state >= config.model.states) config_error("initial_state out of range");

    if (j.contains("solver")) {
        const json& s = j["solver"];
        config.solver.steps = get_or<std::size_t>(s, "steps", config.solver.steps);
        config.solver.tol = get_or<double>(s, "tol", config.solver.tol);
        config.solver.ladder_cap = get_or<long>(s, "ladder_cap", config.solver.ladder_cap);
    }
    if (j.contains("monte_carlo")) {
        const json& m = j["monte_carlo"];
        config.monte_carlo.paths = get_or<std::size_t>(m, "paths", config.monte_carlo.paths);
        config.monte_carlo.estimate_paths =
            get_or<std::size_t>(m, "estimate_paths", config.monte_carlo.estimate_paths);
        config.monte_carlo.seed = get_or<std::uint64_t>(m, "seed", config.monte_carlo.seed);
    }
    if (j.contains("generator")) {
        const json& g = j["generator"];
        auto& gen = config.generator;
        gen.min_states = get_or<std::size_t>(g, "min_states", gen.min_states);
        gen.max_states = get_or<std::size_t>(g, "max_states", gen.max_states);
        gen.rate_scale = get_or<double>(g, "rate_scale", gen.rate_scale);
        gen.horizon = get_or<double>(g, "horizon", gen.horizon);
        gen.lipschitz_y_cap = get_or<double>(g, "lipschitz_y_cap", gen.lipschitz_y_cap);
        gen.margin_target = get_or<double>(g, "margin_target", gen.margin_target);
        gen.pairs = get_or<std::size_t>(g, "pairs", gen.pairs);
        gen.pool = get_or<std::size_t>(g, "pool", gen.pool);
        gen.invert_comparison = get_or<bool>(g, "invert_comparison", gen.invert_comparison);
        if (gen.min_states == 0 || gen.min_states > gen.max_states)
            config_error("generator state range is empty");
    }
    config.suites = get_or<std::vector<std::string>>(j, "suites", {});
    if (config.solver.steps == 0) config_error("solver.steps must be positive");
    if (!(config.solver.tol > 0.0)) config_error("solver.tol must be positive");
    if (config.solver.ladder_cap < 1) config_error("solver.ladder_cap must be at least 1");
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        config_error("'" + path.string() + "': " + e.what());
    }
    return parse_config(j);
}

json to_json(const ModelSpec& spec) {
    json schedule = json::array();
    for (const auto& seg : spec.schedule) {
        schedule.push_back({{"start", seg.start}, {"rates", matrix_json(seg.rates)}});
    }
    return {{"states", spec.states}, {"horizon", spec.horizon}, {"schedule", schedule}};
}

json to_json(const DriverSpec& spec) {
    return {{"family", spec.family}, {"a", spec.a},         {"b", spec.b},
            {"c", spec.c},           {"alpha", spec.alpha}, {"beta", spec.beta}};
}

json to_json(const ObstacleSpec& spec) {
    return {{"family", spec.family},
            {"level", spec.level},
            {"offset", spec.offset},
            {"slope", spec.slope}};
}

json to_json(const ExperimentConfig& config) {
    const auto& gen = config.generator;
    return {
        {"model", to_json(config.model)},
        {"driver", to_json(config.driver)},
        {"obstacle", to_json(config.obstacle)},
        {"terminal", config.terminal},
        {"initial_state", config.initial_state},
        {"solver",
         {{"steps", config.solver.steps},
          {"tol", config.solver.tol},
          {"ladder_cap", config.solver.ladder_cap}}},
        {"monte_carlo",
         {{"paths", config.monte_carlo.paths},
          {"estimate_paths", config.monte_carlo.estimate_paths},
          {"seed", config.monte_carlo.seed}}},
        {"generator",
         {{"min_states", gen.min_states},
          {"max_states", gen.max_states},
          {"rate_scale", gen.rate_scale},
          {"horizon", gen.horizon},
          {"lipschitz_y_cap", gen.lipschitz_y_cap},
          {"margin_target", gen.margin_target},
          {"pairs", gen.pairs},
          {"pool", gen.pool},
          {"invert_comparison", gen.invert_comparison}}},
        {"suites", config.suites},
    };
}

ChainModel build_model(const ModelSpec& spec) {
    return validate_model(spec.schedule, spec.states, spec.horizon);
}

Driver build_driver(const DriverSpec& spec, std::size_t states) {
    if (spec.family == "zero") return zero_driver();
    if (spec.family == "constant") return constant_driver(spec.c);
    if (spec.family == "linear") return linear_driver(spec.a);
    if (spec.family == "affine") {
        Vector alpha = spec.alpha.empty() ? Vector::Zero(static_cast<Eigen::Index>(states))
                                          : to_vector(spec.alpha, states, "driver.alpha");
        Vector beta = spec.beta.empty() ? Vector::Zero(static_cast<Eigen::Index>(states))
                                        : to_vector(spec.beta, states, "driver.beta");
        return affine_driver(spec.a, spec.b, std::move(alpha), std::move(beta));
    }
    config_error("unknown driver family '" + spec.family + "'");
}

Obstacle build_obstacle(const ObstacleSpec& spec, std::size_t states, double horizon) {
    if (spec.family == "none") return no_obstacle();
    if (spec.family == "constant") return constant_obstacle(spec.level);
    if (spec.family == "affine") {
        return affine_obstacle(to_vector(spec.offset, states, "obstacle.offset"),
                               to_vector(spec.slope, states, "obstacle.slope"), horizon);
    }
    config_error("unknown obstacle family '" + spec.family + "'");
}

Vector build_terminal(const std::vector<double>& terminal, std::size_t states) {
    return to_vector(terminal, states, "terminal");
}

}  // namespace chainbsde
