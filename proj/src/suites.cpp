#include "chainbsde/suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "chainbsde/error.hpp"
#include "chainbsde/generator.hpp"
#include "chainbsde/montecarlo.hpp"

namespace chainbsde {

namespace {

constexpr double kZLimit = 4.0;

SubCheck at_most(std::string label, double value, double threshold) {
    return SubCheck{std::move(label), value, threshold, Relation::AtMost};
}
SubCheck at_least(std::string label, double value, double threshold) {
    return SubCheck{std::move(label), value, threshold, Relation::AtLeast};
}
SubCheck below(std::string label, double value, double threshold) {
    return SubCheck{std::move(label), value, threshold, Relation::Below};
}
SubCheck above(std::string label, double value, double threshold) {
    return SubCheck{std::move(label), value, threshold, Relation::Above};
}

Matrix two_state(double out0, double out1) {
    Matrix a(2, 2);
    a << -out0, out1, out0, -out1;
    return a;
}

Matrix random_generator(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> rate(0.0, scale);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto size = static_cast<Eigen::Index>(n);
    Matrix a = Matrix::Zero(size, size);
    for (Eigen::Index j = 0; j < size; ++j) {
        for (Eigen::Index i = 0; i < size; ++i) {
            // Some zero rates so degenerate Psi shapes are covered too.
            if (i != j && unit(rng) > 0.2) a(i, j) = rate(rng);
        }
        a(j, j) = -a.col(j).sum();
    }
    return a;
}

Vector unit_vector(std::size_t n, std::size_t i) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
    e(static_cast<Eigen::Index>(i)) = 1.0;
    return e;
}

std::string with_seed(const std::string& what, std::uint64_t seed) {
    std::ostringstream os;
    os << what << " (instance seed " << seed << ")";
    return os.str();
}

template <class Fn>
auto annotate(std::uint64_t seed, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), with_seed(e.detail(), seed));
    }
}

RbsdeInstance stationary_instance() {
    return RbsdeInstance{constant_model(two_state(1.0, 2.0), 1.0), constant_driver(-1.0),
                         constant_obstacle(1.0), Vector::Constant(2, 1.0)};
}

// E int ||Z||^2 dt under the law, trapezoid in time.
double z_energy(const ChainModel& model, const ValueGrid& grid, const Matrix& values,
                const Matrix& law) {
    const auto& times = grid.times;
    std::vector<double> density(times.size(), 0.0);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        const Vector z = values.row(row).transpose();
        const Matrix& rates = model.rates_at(times[k]);
        for (Eigen::Index i = 0; i < values.cols(); ++i) {
            density[k] += law(row, i) * seminorm_sq(rates, static_cast<std::size_t>(i), z);
        }
    }
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        total += 0.5 * (density[k] + density[k + 1]) * (times[k + 1] - times[k]);
    }
    return total;
}

// E sup_k g(t_k, X_{t_k})^2 by Monte Carlo.
double mc_sup_sq(const ChainModel& model, const std::vector<double>& times, const Matrix& g,
                 std::size_t x0, std::size_t paths, std::uint64_t seed) {
    return expectation_on_paths(
               model,
               [&](const ChainPath& path) {
                   double worst = 0.0;
                   for (std::size_t k = 0; k < times.size(); ++k) {
                       const double v = g(static_cast<Eigen::Index>(k),
                                          static_cast<Eigen::Index>(path.state_at(times[k])));
                       worst = std::max(worst, v * v);
                   }
                   return worst;
               },
               x0, paths, seed)
        .mean;
}

Matrix driver_at_zero(const ChainModel& model, const Driver& driver,
                      const std::vector<double>& times) {
    const auto n = static_cast<Eigen::Index>(model.states());
    Matrix out(static_cast<Eigen::Index>(times.size()), n);
    const Vector zero = Vector::Zero(n);
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out(static_cast<Eigen::Index>(k), i) = std::abs(
                driver(times[k], 0.0, zero, static_cast<std::size_t>(i), model.rates_at(times[k])));
        }
    }
    return out;
}

struct Sides {
    double lhs = 0.0;
    double rhs = 0.0;
};

// Both sides of the a priori estimate, RBSDE form (BSDE form when sol has no push).
Sides estimate_sides(const RbsdeInstance& inst, const RbsdeSolution& sol, bool reflected,
                     std::size_t paths, std::uint64_t seed) {
    const ChainModel& model = inst.model;
    const auto& times = sol.values.times;
    const Vector p0 = unit_vector(model.states(), 0);
    const Matrix law = forward_law(model, p0, times);

    Sides s;
    s.lhs = mc_sup_sq(model, times, sol.values.values, 0, paths, seed) +
            z_energy(model, sol.values, sol.values.values, law);
    const auto last = static_cast<Eigen::Index>(times.size() - 1);
    for (Eigen::Index i = 0; i < inst.xi.size(); ++i) s.rhs += law(last, i) * inst.xi(i) * inst.xi(i);
    s.rhs += tail_integral_second_moment(model, p0, times, driver_at_zero(model, inst.driver, times))
                 .front();
    if (reflected) {
        s.lhs += tail_integral_second_moment(model, p0, times, sol.intensity).front();
        s.rhs += mc_sup_sq(model, times, sol.obstacle.cwiseMax(0.0), 0, paths, seed);
    }
    return s;
}

RbsdeInstance scaled(const GeneratedInstance& g, double lambda) {
    GeneratedInstance s = g;
    for (auto& x : s.terminal) x *= lambda;
    for (auto& x : s.driver_spec.alpha) x *= lambda;
    for (auto& x : s.driver_spec.beta) x *= lambda;
    for (auto& x : s.obstacle_spec.offset) x *= lambda;
    for (auto& x : s.obstacle_spec.slope) x *= lambda;
    return s.build();
}

GeneratorConstraints base_constraints(const ExperimentConfig& config) {
    return constraints_from(config.generator);
}

std::vector<RbsdeInstance> instance_pool(const ExperimentConfig& config,
                                         std::vector<std::uint64_t>& seeds) {
    std::vector<RbsdeInstance> pool;
    pool.push_back(stationary_instance());
    seeds.push_back(0);
    if (config.obstacle.family != "none") {
        pool.push_back(RbsdeInstance{
            build_model(config.model), build_driver(config.driver, config.model.states),
            build_obstacle(config.obstacle, config.model.states, config.model.horizon),
            build_terminal(config.terminal, config.model.states)});
        seeds.push_back(config.monte_carlo.seed);
    }
    GeneratorConstraints c = base_constraints(config);
    c.obstacle_active = true;
    for (std::size_t k = 0; k < config.generator.pool; ++k) {
        const std::uint64_t seed = config.monte_carlo.seed + 100 + k;
        pool.push_back(generate_instance(seed, c).build());
        seeds.push_back(seed);
    }
    return pool;
}

// u(t) = exp(A'(T - t)) xi for f = 0, chaining the exponentials across segments.
Vector zero_driver_oracle(const ChainModel& model, const Vector& xi, double t) {
    Vector u = xi;
    const auto& schedule = model.schedule();
    for (std::size_t s = schedule.size(); s-- > 0;) {
        const double lo = std::max(t, schedule[s].start);
        const double hi = model.segment_end(s);
        if (hi <= lo) continue;
        const Matrix step = (schedule[s].rates.transpose() * (hi - lo)).exp();
        u = step * u;
    }
    return u;
}

double oracle_error(const ChainModel& model, const Vector& xi, std::size_t steps) {
    const ValueGrid sol = solve_bsde(model, zero_driver(), xi, steps);
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        const Vector exact = zero_driver_oracle(model, xi, sol.times[k]);
        worst = std::max(worst, (sol.z(k) - exact).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ----------------------------------------------------------------------------

ReportRow seminorm_suite(const ExperimentConfig& config) {
    ReportRow row{"seminorm", "semi-norm equals its closed form; bracket density is a PSD Laplacian",
                  config.monte_carlo.seed, {}};
    auto rng = substream(config.monte_carlo.seed, 1);
    std::uniform_int_distribution<std::size_t> size(2, 5);
    std::uniform_real_distribution<double> coeff(-5.0, 5.0);
    double closed_form = 0.0, symmetry = 0.0, kernel = 0.0, gauge = 0.0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        const Matrix a = random_generator(n, rng, 3.0);
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        Vector c(static_cast<Eigen::Index>(n));
        for (auto& x : c) x = coeff(rng);
        const Matrix p = psi_from_rates(a, i);
        const double quad = c.dot(p * c);
        closed_form = std::max(closed_form, std::abs(quad - seminorm_sq(a, i, c)) / (1.0 + std::abs(quad)));
        symmetry = std::max(symmetry, (p - p.transpose()).cwiseAbs().maxCoeff());
        kernel = std::max(kernel, (p * Vector::Ones(p.rows())).cwiseAbs().maxCoeff());
        min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(p).eigenvalues().minCoeff());
        const double lambda = coeff(rng);
        const Vector shifted = c + Vector::Constant(c.size(), lambda);
        gauge = std::max(gauge, std::abs(seminorm_sq(a, i, shifted) - seminorm_sq(a, i, c)) /
                                    (1.0 + seminorm_sq(a, i, c)));
    }
    row.checks = {at_most("max relative closed-form error", closed_form, 1e-10),
                  at_most("max asymmetry", symmetry, 1e-12),
                  at_least("min eigenvalue", min_eig, -1e-10),
                  at_most("max |Psi 1|", kernel, 1e-12),
                  at_most("max relative gauge change", gauge, 1e-10)};
    return row;
}

ReportRow pseudoinverse_suite(const ExperimentConfig& config) {
    ReportRow row{"pseudoinverse", "Moore-Penrose identities for symmetric matrices",
                  config.monte_carlo.seed, {}};
    auto rng = substream(config.monte_carlo.seed, 2);
    std::uniform_int_distribution<std::size_t> size(2, 5);
    std::uniform_real_distribution<double> spectrum(0.1, 5.0);
    double psi_defect = 0.0, psd_defect = 0.0, involution = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        const Matrix p = psi_from_rates(random_generator(n, rng, 3.0),
                                        std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
        psi_defect = std::max(psi_defect, moore_penrose_defect(p, pseudoinverse(p)));
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        const auto size_n = static_cast<Eigen::Index>(n);
        const std::size_t rank = std::uniform_int_distribution<std::size_t>(0, n)(rng);
        Matrix g(size_n, size_n);
        std::normal_distribution<double> normal;
        for (Eigen::Index r = 0; r < size_n; ++r)
            for (Eigen::Index c = 0; c < size_n; ++c) g(r, c) = normal(rng);
        const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
        Vector eig = Vector::Zero(size_n);
        for (std::size_t k = 0; k < rank; ++k) eig(static_cast<Eigen::Index>(k)) = spectrum(rng);
        Matrix m = q * eig.asDiagonal() * q.transpose();
        m = 0.5 * (m + m.transpose());
        const Matrix md = pseudoinverse(m);
        psd_defect = std::max(psd_defect, moore_penrose_defect(m, md));
        involution = std::max(involution, (pseudoinverse(md) - m).cwiseAbs().maxCoeff());
    }
    row.checks = {at_most("max identity defect, bracket densities", psi_defect, 1e-8),
                  at_most("max identity defect, random PSD", psd_defect, 1e-8),
                  at_most("max |(Q^+)^+ - Q|, random PSD", involution, 1e-8)};
    return row;
}

ReportRow bsde_oracle_suite(const ExperimentConfig& config) {
    ReportRow row{"bsde-oracle", "BSDE with zero driver solved against exp(A'(T-t)) xi",
                  config.monte_carlo.seed, {}};
    const ChainModel symmetric = constant_model(two_state(1.0, 1.0), 1.0);
    Vector xi_sym(2);
    xi_sym << 1.0, 0.0;

    auto rng = substream(config.monte_carlo.seed, 3);
    const ChainModel four = validate_model(
        {RateSegment{0.0, random_generator(4, rng)}, RateSegment{0.5, random_generator(4, rng)}}, 4,
        1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Vector xi_four(4);
    for (auto& x : xi_four) x = unit(rng);

    const double err_sym = oracle_error(symmetric, xi_sym, 1000);
    const double err_four = oracle_error(four, xi_four, 1000);
    const double ratio_sym = oracle_error(symmetric, xi_sym, 16) / oracle_error(symmetric, xi_sym, 32);
    const double ratio_four = oracle_error(four, xi_four, 16) / oracle_error(four, xi_four, 32);
    row.checks = {at_most("sup error, two-state, 1000 steps", err_sym, 1e-6),
                  at_most("sup error, four-state two-segment, 1000 steps", err_four, 1e-6),
                  at_least("error ratio 16 -> 32 steps, two-state", ratio_sym, 12.0),
                  at_most("error ratio 16 -> 32 steps, two-state (upper)", ratio_sym, 20.0),
                  at_least("error ratio 16 -> 32 steps, four-state", ratio_four, 12.0),
                  at_most("error ratio 16 -> 32 steps, four-state (upper)", ratio_four, 20.0)};
    return row;
}

ReportRow isometry_suite(const ExperimentConfig& config) {
    ReportRow row{"isometry", "E(int Z'dM)^2 = E int ||Z||^2 dt for predictable Z",
                  config.monte_carlo.seed, {}};
    const ChainModel model = constant_model(two_state(1.0, 1.0), 1.0);
    const ZField z = [](double, std::size_t) {
        Vector v(2);
        v << 1.0, 0.0;
        return v;
    };
    const auto grid = uniform_grid(model.horizon(), 100);
    const IsometryResult r =
        isometry_check(model, z, 0, config.monte_carlo.paths, grid, config.monte_carlo.seed);
    row.checks = {at_most("zscore lhs vs rhs", r.zscore, kZLimit),
                  at_most("zscore rhs vs exact T", zscore(r.rhs.mean - model.horizon(), r.rhs.std_error),
                          kZLimit),
                  at_most("zscore lhs vs exact T", zscore(r.lhs.mean - model.horizon(), r.lhs.std_error),
                          kZLimit)};
    return row;
}

ReportRow bracket_suite(const ExperimentConfig& config) {
    ReportRow row{"bracket", "[X,X] - <X,X> is a martingale with <X,X> = int Psi dt",
                  config.monte_carlo.seed, {}};
    const ChainModel model = constant_model(two_state(1.0, 1.0), 1.0);
    const BracketResult good = bracket_check(model, 0, config.monte_carlo.paths, config.monte_carlo.seed);
    const PsiFn corrupted = [](const Matrix& rates, std::size_t state) {
        const Vector x = unit_vector(static_cast<std::size_t>(rates.rows()), state);
        Matrix out = (rates * x).asDiagonal();
        out -= Matrix(x.asDiagonal()) * rates.transpose();
        return out;
    };
    const BracketResult bad =
        bracket_check(model, 0, config.monte_carlo.paths, config.monte_carlo.seed, corrupted);
    row.checks = {at_most("max entry zscore", good.max_zscore, kZLimit),
                  at_least("corrupted density max zscore", bad.max_zscore, 10.0)};
    return row;
}

ReportRow stationary_suite(const ExperimentConfig& config) {
    ReportRow row{"stationary-obstacle", "f = -1, xi = G = c: V = c and K_t = t",
                  config.monte_carlo.seed, {}};
    const RbsdeInstance inst = stationary_instance();
    const double c = 1.0;
    const RbsdeSolution pen = solve_rbsde(inst.model, inst.driver, inst.obstacle, inst.xi,
                                          config.solver.steps, config.solver.tol, 4096);
    const double v_err = (pen.values.values.array() - c).abs().maxCoeff();

    const std::size_t paths = 1000;
    double k_err = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const ChainPath path = simulate_path(inst.model, 0, config.monte_carlo.seed, p);
        const auto k = k_on_path(pen, path);
        for (std::size_t j = 0; j < k.size(); ++j) {
            k_err = std::max(k_err, std::abs(k[j] - pen.values.times[j]));
        }
    }

    const RbsdeSolution proj =
        solve_rbsde_projected(inst.model, inst.driver, inst.obstacle, inst.xi, 2000);
    double agree = 0.0;
    for (std::size_t k = 0; k < proj.values.times.size(); ++k) {
        for (std::size_t i = 0; i < inst.model.states(); ++i) {
            agree = std::max(agree, std::abs(proj.values.values(static_cast<Eigen::Index>(k),
                                                                static_cast<Eigen::Index>(i)) -
                                             pen.values.at(proj.values.times[k], i)));
        }
    }
    row.checks = {at_most("sup |V - c|", v_err, 1e-2),
                  at_most("sup over 1000 paths |K_t - t|", k_err, 1e-2),
                  at_most("sup |V_penalized - V_projected|", agree, 5e-2),
                  at_most("final penalty level", static_cast<double>(pen.n_final), 4096.0),
                  at_most("final grid steps", static_cast<double>(pen.values.steps()), 4096.0)};
    return row;
}

ReportRow monotonicity_suite(const ExperimentConfig& config) {
    ReportRow row{"monotonicity", "penalized solutions increase with n to the reflected solution",
                  config.monte_carlo.seed, {}};
    std::vector<std::uint64_t> seeds;
    const auto pool = instance_pool(config, seeds);
    double worst = 0.0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& inst = pool[k];
        const RbsdeSolution sol = annotate(seeds[k], [&] {
            return solve_rbsde(inst.model, inst.driver, inst.obstacle, inst.xi, config.solver.steps,
                               config.solver.tol, config.solver.ladder_cap);
        });
        worst = std::min(worst, sol.min_level_increase());
    }
    row.checks = {at_least("min increase between ladder levels", worst, -1e-10),
                  at_least("instances", static_cast<double>(pool.size()), 1.0)};
    return row;
}

std::pair<RbsdeSolution, RbsdeSolution> solve_aligned(const RbsdeInstance& a, const RbsdeInstance& b,
                                                      const ExperimentConfig& config) {
    RbsdeSolution sa = solve_rbsde(a.model, a.driver, a.obstacle, a.xi, config.solver.steps,
                                   config.solver.tol, config.solver.ladder_cap);
    RbsdeSolution sb = solve_rbsde(b.model, b.driver, b.obstacle, b.xi, config.solver.steps,
                                   config.solver.tol, config.solver.ladder_cap);
    if (sa.n_final < sb.n_final) {
        sa = solve_rbsde_at_level(a.model, a.driver, a.obstacle, a.xi, sb.n_final, config.solver.steps);
    } else if (sb.n_final < sa.n_final) {
        sb = solve_rbsde_at_level(b.model, b.driver, b.obstacle, b.xi, sa.n_final, config.solver.steps);
    }
    return {std::move(sa), std::move(sb)};
}

ReportRow comparison_suite(const ExperimentConfig& config) {
    ReportRow row{"comparison", "xi_1 <= xi_2 and f <= g imply Y <= V and K >= J",
                  config.monte_carlo.seed, {}};
    GeneratorConstraints c = base_constraints(config);
    double value_gap = std::numeric_limits<double>::infinity();
    double k_gap = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < config.generator.pairs; ++p) {
        const std::uint64_t seed = config.monte_carlo.seed + 1000 + p;
        c.obstacle_active = p % 2 == 0;
        const ComparisonGap gap = annotate(seed, [&] {
            const GeneratedPair pair = generate_pair(seed, c, config.generator.invert_comparison);
            const auto [lo, hi] = solve_aligned(pair.lower.build(), pair.upper.build(), config);
            return compare_rbsde(lo, hi);
        });
        value_gap = std::min(value_gap, gap.value_gap);
        k_gap = std::min(k_gap, gap.k_gap);
    }
    const std::uint64_t control_seed = config.monte_carlo.seed + 5000;
    c.obstacle_active = true;
    const ComparisonGap control = annotate(control_seed, [&] {
        const GeneratedPair pair = generate_pair(control_seed, c, true);
        const auto [lo, hi] = solve_aligned(pair.lower.build(), pair.upper.build(), config);
        return compare_rbsde(lo, hi);
    });
    row.checks = {at_least("min value gap V - Y", value_gap, -1e-6),
                  at_least("min push gap K - J", k_gap, -1e-6),
                  at_most("inverted control value gap", control.value_gap, -1e-6)};
    return row;
}

ReportRow estimate_suite(const ExperimentConfig& config) {
    ReportRow row{"estimate", "solution size bounded by a constant times the data size",
                  config.monte_carlo.seed, {}};
    const std::uint64_t seed = config.monte_carlo.seed + 200;
    GeneratorConstraints c = base_constraints(config);
    c.obstacle_active = true;
    const GeneratedInstance base = annotate(seed, [&] { return generate_instance(seed, c); });

    // Zero data: xi = 0, f(t, 0, 0) = 0, G <= 0.
    GeneratedInstance zero = base;
    std::fill(zero.terminal.begin(), zero.terminal.end(), 0.0);
    std::fill(zero.driver_spec.alpha.begin(), zero.driver_spec.alpha.end(), 0.0);
    std::fill(zero.driver_spec.beta.begin(), zero.driver_spec.beta.end(), 0.0);
    for (auto& x : zero.obstacle_spec.offset) x = -std::abs(x) - 0.1;
    for (auto& x : zero.obstacle_spec.slope) x = -std::abs(x);
    const RbsdeInstance zi = zero.build();
    const RbsdeSolution zsol = solve_rbsde(zi.model, zi.driver, zi.obstacle, zi.xi, config.solver.steps,
                                           config.solver.tol, config.solver.ladder_cap);
    const ValueGrid zbsde = solve_bsde(zi.model, zi.driver, zi.xi, config.solver.steps);

    const RbsdeInstance b1 = base.build();
    const long level = annotate(seed, [&] {
        return solve_rbsde(b1.model, b1.driver, b1.obstacle, b1.xi, config.solver.steps,
                           config.solver.tol, config.solver.ladder_cap)
            .n_final;
    });
    const std::vector<double> lambdas = {1.0, 1e-1, 1e-2};
    std::vector<double> r_ratio, b_ratio, r_lhs, b_lhs;
    const std::size_t paths = config.monte_carlo.estimate_paths;
    for (double lambda : lambdas) {
        const RbsdeInstance inst = scaled(base, lambda);
        const RbsdeSolution sol = solve_rbsde_at_level(inst.model, inst.driver, inst.obstacle, inst.xi,
                                                       level, config.solver.steps);
        const Sides r = estimate_sides(inst, sol, true, paths, seed);
        RbsdeSolution free;
        free.values = solve_bsde(inst.model, inst.driver, inst.xi, config.solver.steps);
        const Sides b = estimate_sides(inst, free, false, paths, seed);
        r_ratio.push_back(r.lhs / r.rhs);
        b_ratio.push_back(b.lhs / b.rhs);
        r_lhs.push_back(r.lhs);
        b_lhs.push_back(b.lhs);
    }
    double r_shrink = 0.0, b_shrink = 0.0;
    for (std::size_t k = 1; k < lambdas.size(); ++k) {
        const double l2 = lambdas[k] * lambdas[k];
        r_shrink = std::max(r_shrink, r_lhs[k] / (l2 * r_lhs[0]));
        b_shrink = std::max(b_shrink, b_lhs[k] / (l2 * b_lhs[0]));
    }
    row.checks = {below("RBSDE ratio spread over lambda", ratio_spread(r_ratio), 10.0),
                  below("BSDE ratio spread over lambda", ratio_spread(b_ratio), 10.0),
                  at_most("zero data sup |V|", zsol.values.values.cwiseAbs().maxCoeff(), 1e-12),
                  at_most("zero data max push intensity", zsol.intensity.maxCoeff(), 0.0),
                  at_most("zero data sup |Y| (BSDE)", zbsde.values.cwiseAbs().maxCoeff(), 1e-12),
                  at_most("RBSDE LHS(lambda) / (lambda^2 LHS(1))", r_shrink, 1.1),
                  at_most("BSDE LHS(lambda) / (lambda^2 LHS(1))", b_shrink, 1.1)};
    return row;
}

ReportRow continuous_dependence_suite(const ExperimentConfig& config) {
    ReportRow row{"continuous-dependence",
                  "difference of solutions bounded by differences of xi, forcing and obstacle",
                  config.monte_carlo.seed, {}};
    const std::uint64_t seed = config.monte_carlo.seed + 300;
    const std::vector<double> eps = {1e-1, 1e-2, 1e-3, 1e-4};
    const std::size_t paths = config.monte_carlo.estimate_paths;

    // Linear driver, xi perturbation only.
    GeneratorConstraints lc = base_constraints(config);
    lc.linear_driver = true;
    lc.obstacle_active = true;
    const GeneratedInstance lin = annotate(seed, [&] { return generate_instance(seed, lc); });
    const RbsdeInstance la = lin.build();
    const std::size_t n = la.model.states();
    auto rng = substream(seed, 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector w(static_cast<Eigen::Index>(n)), psi(static_cast<Eigen::Index>(n)),
        gshift(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        w(static_cast<Eigen::Index>(i)) = 0.5 + unit(rng);
        psi(static_cast<Eigen::Index>(i)) = unit(rng) - 0.5;
        gshift(static_cast<Eigen::Index>(i)) = unit(rng) - 0.5;
    }
    const long level = solve_rbsde(la.model, la.driver, la.obstacle, la.xi, config.solver.steps,
                                   config.solver.tol, config.solver.ladder_cap)
                           .n_final;
    DependenceOptions opts;
    opts.steps = config.solver.steps;
    opts.penalty = level;
    opts.paths = paths;
    opts.seed = seed;

    const Vector p0 = unit_vector(n, 0);
    const ValueGrid base_free = solve_bsde(la.model, la.driver, la.xi, config.solver.steps);
    const Matrix law = forward_law(la.model, p0, base_free.times);

    std::vector<double> bsde_lhs, rbsde_lhs;
    for (double e : eps) {
        RbsdeInstance lb{la.model, la.driver, la.obstacle, la.xi + e * w};
        rbsde_lhs.push_back(continuous_dependence_gap(la, lb, opts).lhs);
        const ValueGrid pert = solve_bsde(la.model, la.driver, lb.xi, config.solver.steps);
        const Matrix y = base_free.values - pert.values;
        bsde_lhs.push_back(mc_sup_sq(la.model, base_free.times, y, 0, paths, seed) +
                           z_energy(la.model, base_free, y, law));
    }

    // Joint perturbation of (xi, phi, G) on an affine-driver instance.
    GeneratorConstraints ac = base_constraints(config);
    ac.obstacle_active = true;
    const GeneratedInstance aff = annotate(seed + 1, [&] { return generate_instance(seed + 1, ac); });
    const RbsdeInstance ja = aff.build();
    const std::size_t m = ja.model.states();
    Vector jw = w.head(static_cast<Eigen::Index>(std::min(n, m)));
    if (m > n) {
        jw.conservativeResize(static_cast<Eigen::Index>(m));
        for (std::size_t i = n; i < m; ++i) jw(static_cast<Eigen::Index>(i)) = 1.0;
    }
    Vector jpsi = Vector::Constant(static_cast<Eigen::Index>(m), 0.3);
    Vector jg = Vector::Constant(static_cast<Eigen::Index>(m), -0.2);
    for (std::size_t i = 0; i < std::min(n, m); ++i) {
        jpsi(static_cast<Eigen::Index>(i)) = psi(static_cast<Eigen::Index>(i));
        jg(static_cast<Eigen::Index>(i)) = gshift(static_cast<Eigen::Index>(i));
    }
    DependenceOptions jopts = opts;
    jopts.penalty = solve_rbsde(ja.model, ja.driver, ja.obstacle, ja.xi, config.solver.steps,
                                config.solver.tol, config.solver.ladder_cap)
                        .n_final;
    const ValueGrid jfree = solve_bsde(ja.model, ja.driver, ja.xi, config.solver.steps);
    const Matrix jlaw = forward_law(ja.model, unit_vector(m, 0), jfree.times);

    std::vector<double> joint_ratio, pathwise_ratio, bsde_joint_ratio;
    for (double e : eps) {
        Driver forced = with_forcing(ja.driver, [e, jpsi](double, std::size_t i) {
            return e * jpsi(static_cast<Eigen::Index>(i));
        });
        Obstacle shifted{[g = ja.obstacle, e, jg](double t, std::size_t i) {
                             return g(t, i) + e * jg(static_cast<Eigen::Index>(i));
                         },
                         ja.obstacle.family + "+shift"};
        RbsdeInstance jb{ja.model, forced, shifted, ja.xi + e * jw};
        const DependenceTerms t = continuous_dependence_gap(ja, jb, jopts);
        joint_ratio.push_back(t.lhs / t.rhs);
        pathwise_ratio.push_back(t.pathwise_lhs / t.rhs);

        const ValueGrid pert = solve_bsde(ja.model, forced, jb.xi, config.solver.steps);
        const Matrix y = jfree.values - pert.values;
        const double lhs = mc_sup_sq(ja.model, jfree.times, y, 0, paths, seed) +
                           z_energy(ja.model, jfree, y, jlaw);
        const double rhs = t.xi_sq + t.forcing_sq;
        bsde_joint_ratio.push_back(lhs / rhs);
    }

    row.checks = {at_most("|BSDE log-log slope - 2|", std::abs(loglog_slope(eps, bsde_lhs) - 2.0), 0.1),
                  at_most("|RBSDE log-log slope - 2|", std::abs(loglog_slope(eps, rbsde_lhs) - 2.0), 0.1),
                  below("RBSDE joint LHS/RHS spread", ratio_spread(joint_ratio), 10.0),
                  below("RBSDE pathwise LHS/RHS spread", ratio_spread(pathwise_ratio), 10.0),
                  below("BSDE joint LHS/RHS spread", ratio_spread(bsde_joint_ratio), 10.0)};
    return row;
}

ReportRow skorokhod_suite(const ExperimentConfig& config) {
    ReportRow row{"skorokhod", "int (V - G) dK = 0", config.monte_carlo.seed, {}};
    std::vector<std::uint64_t> seeds;
    const auto pool = instance_pool(config, seeds);
    auto normalized = [](const RbsdeSolution& sol) {
        const double bound =
            1e-3 * (1.0 + sol.values.values.cwiseAbs().maxCoeff() * k_total_bound(sol));
        return skorokhod_residual(sol) / bound;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& inst = pool[k];
        const RbsdeSolution sol = annotate(seeds[k], [&] {
            return solve_rbsde(inst.model, inst.driver, inst.obstacle, inst.xi, config.solver.steps,
                               config.solver.tol, config.solver.ladder_cap);
        });
        worst = std::max(worst, normalized(sol));
        if (k == 0) {
            const RbsdeSolution proj =
                solve_rbsde_projected(inst.model, inst.driver, inst.obstacle, inst.xi, 2000);
            worst = std::max(worst, normalized(proj));
        }
    }
    const RbsdeInstance st = stationary_instance();
    RbsdeSolution corrupted = solve_rbsde(st.model, st.driver, st.obstacle, st.xi, config.solver.steps,
                                          config.solver.tol, config.solver.ladder_cap);
    corrupted.obstacle.array() += 1.0;
    row.checks = {at_most("max residual / (1e-3 (1 + |V| K_T))", worst, 1.0),
                  above("corrupted control residual / bound", normalized(corrupted), 1.0)};
    return row;
}

}  // namespace

bool is_suite(std::string_view name) noexcept {
    return std::find(kSuiteNames.begin(), kSuiteNames.end(), name) != kSuiteNames.end();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lx = std::log(x[k]);
        const double ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

double ratio_spread(const std::vector<double>& ratios) {
    if (ratios.empty()) return 1.0;
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
    return *hi / *lo;
}

ReportRow run_one(std::string_view name, const ExperimentConfig& config) {
    if (name == "seminorm") return seminorm_suite(config);
    if (name == "pseudoinverse") return pseudoinverse_suite(config);
    if (name == "bsde-oracle") return bsde_oracle_suite(config);
    if (name == "isometry") return isometry_suite(config);
    if (name == "bracket") return bracket_suite(config);
    if (name == "stationary-obstacle") return stationary_suite(config);
    if (name == "monotonicity") return monotonicity_suite(config);
    if (name == "comparison") return comparison_suite(config);
    if (name == "estimate") return estimate_suite(config);
    if (name == "continuous-dependence") return continuous_dependence_suite(config);
    if (name == "skorokhod") return skorokhod_suite(config);
    throw Error(ErrorCode::ConfigError, "unknown suite '" + std::string(name) + "'");
}

SuiteReport run_suite(const ExperimentConfig& config, const std::vector<std::string>& selection) {
    std::vector<std::string_view> chosen;
    for (const auto& s : selection) {
        if (s == "all") {
            chosen.assign(kSuiteNames.begin(), kSuiteNames.end());
            break;
        }
        if (!is_suite(s)) throw Error(ErrorCode::ConfigError, "unknown suite '" + s + "'");
    }
    if (chosen.empty()) {
        // Keep report order fixed regardless of selection order.
        for (auto name : kSuiteNames) {
            if (std::find(selection.begin(), selection.end(), name) != selection.end())
                chosen.push_back(name);
        }
    }

    SuiteReport report;
    report.seed = config.monte_carlo.seed;
    const ChainModel model = build_model(config.model);
    const Driver driver = build_driver(config.driver, config.model.states);
    report.assumption_margin = assumption_margin(model, driver.lipschitz_z);
    if (report.assumption_margin >= 1.0) {
        std::ostringstream os;
        os << "assumption margin " << report.assumption_margin
           << " >= 1: comparison results need not apply to the configured driver";
        report.warnings.push_back(os.str());
    }
    for (auto name : chosen) report.rows.push_back(run_one(name, config));
    return report;
}

}  // namespace chainbsde
