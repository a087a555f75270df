#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chainbsde/config.hpp"
#include "chainbsde/error.hpp"
#include "chainbsde/suites.hpp"

namespace fs = std::filesystem;
using namespace chainbsde;

namespace {

constexpr int kPass = 0;
constexpr int kCheckFailure = 1;
constexpr int kUsageError = 2;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> paths;
    std::optional<double> tol;
    std::string out = ".";
};

ExperimentConfig load(const Overrides& o) {
    ExperimentConfig config = load_config(o.config);
    if (o.seed) config.monte_carlo.seed = *o.seed;
    if (o.steps) config.solver.steps = *o.steps;
    if (o.paths) config.monte_carlo.paths = *o.paths;
    if (o.tol) config.solver.tol = *o.tol;
    try {
        const ChainModel model = build_model(config.model);
        (void)build_driver(config.driver, config.model.states);
        check_compatible(build_obstacle(config.obstacle, config.model.states, config.model.horizon),
                         build_terminal(config.terminal, config.model.states), model.horizon());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, std::string(to_string(e.code())) + ": " + e.detail());
    }
    return config;
}

fs::path out_dir(const Overrides& o) {
    fs::path dir = o.out;
    fs::create_directories(dir);
    return dir;
}

std::ofstream open(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    return f;
}

int emit(const SuiteReport& report, const Overrides& o) {
    const fs::path dir = out_dir(o);
    const std::string text = render_text(report);
    open(dir / "report.txt") << text;
    open(dir / "report.json") << render_json(report).dump(2) << '\n';
    std::cout << text;
    return report.passed() ? kPass : kCheckFailure;
}

int cmd_solve(const Overrides& o) {
    const ExperimentConfig config = load(o);
    const ChainModel model = build_model(config.model);
    const Driver driver = build_driver(config.driver, config.model.states);
    const Vector xi = build_terminal(config.terminal, config.model.states);
    const fs::path dir = out_dir(o);

    const ValueGrid free = solve_bsde(model, driver, xi, config.solver.steps);
    auto bsde_csv = open(dir / "bsde.csv");
    write_csv(bsde_csv, free, "u");
    std::cout << "wrote " << (dir / "bsde.csv").string() << '\n';

    if (config.obstacle.family != "none") {
        const Obstacle obstacle =
            build_obstacle(config.obstacle, config.model.states, config.model.horizon);
        const RbsdeSolution sol = solve_rbsde(model, driver, obstacle, xi, config.solver.steps,
                                              config.solver.tol, config.solver.ladder_cap);
        auto rbsde_csv = open(dir / "rbsde.csv");
        write_csv(rbsde_csv, sol);
        auto ladder = open(dir / "ladder.txt");
        write_ladder_report(ladder, sol);
        std::cout << "wrote " << (dir / "rbsde.csv").string() << " and "
                  << (dir / "ladder.txt").string() << " (n_final=" << sol.n_final << ")\n";
    }
    return kPass;
}

int cmd_simulate(const Overrides& o) {
    const ExperimentConfig config = load(o);
    const ChainModel model = build_model(config.model);
    if (config.initial_state >= model.states())
        throw Error(ErrorCode::ConfigError, "initial_state out of range");
    const fs::path dir = out_dir(o);
    auto csv = open(dir / "paths.csv");
    csv << std::setprecision(std::numeric_limits<double>::max_digits10);
    csv << "path,time,state\n";
    for (std::size_t p = 0; p < config.monte_carlo.paths; ++p) {
        const ChainPath path = simulate_path(model, config.initial_state, config.monte_carlo.seed, p);
        csv << p << ",0," << path.initial + 1 << '\n';
        for (const auto& j : path.jumps) csv << p << ',' << j.time << ',' << j.state + 1 << '\n';
    }
    std::cout << "wrote " << config.monte_carlo.paths << " paths to " << (dir / "paths.csv").string()
              << '\n';
    return kPass;
}

int cmd_verify(const Overrides& o, const std::string& suite) {
    if (!is_suite(suite)) throw Error(ErrorCode::ConfigError, "unknown suite '" + suite + "'");
    return emit(run_suite(load(o), {suite}), o);
}

int cmd_suite(const Overrides& o) {
    const ExperimentConfig config = load(o);
    return emit(run_suite(config, config.suites), o);
}

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--steps", o.steps, "time steps")->check(CLI::PositiveNumber);
    sub->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--tol", o.tol, "ladder tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov chain BSDE and reflected BSDE solver with verification suites"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Overrides o;
    std::string suite;
    auto* solve = app.add_subcommand("solve", "solve one instance to CSV grids");
    auto* simulate = app.add_subcommand("simulate", "simulate chain paths to CSV");
    auto* verify = app.add_subcommand("verify", "run one verification suite");
    auto* all = app.add_subcommand("suite", "run the suites selected in the config");
    for (auto* sub : {solve, simulate, verify, all}) add_common(sub, o);
    verify->add_option("name", suite, "suite name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsageError;
    }

    try {
        if (*solve) return cmd_solve(o);
        if (*simulate) return cmd_simulate(o);
        if (*verify) return cmd_verify(o, suite);
        return cmd_suite(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError ? kUsageError : kCheckFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    }
}
