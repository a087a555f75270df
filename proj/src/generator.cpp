#include "chainbsde/generator.hpp"

#include <cmath>
#include <sstream>

#include "chainbsde/error.hpp"

namespace chainbsde {

namespace {

constexpr int kMaxAttempts = 32;
// Keeps the penalization ladder within tol 1e-3 by n = 4096.
constexpr double kMaxPush = 2.5;

Matrix random_rates(std::size_t n, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rate(0.2 * scale, scale);
    const auto size = static_cast<Eigen::Index>(n);
    Matrix a = Matrix::Zero(size, size);
    for (Eigen::Index j = 0; j < size; ++j) {
        double out = 0.0;
        for (Eigen::Index i = 0; i < size; ++i) {
            if (i == j) continue;
            a(i, j) = rate(rng);
            out += a(i, j);
        }
        a(j, j) = -out;
    }
    return a;
}

GeneratedInstance draw(std::uint64_t seed, std::uint64_t attempt, const GeneratorConstraints& c) {
    auto rng = substream(seed, attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    GeneratedInstance g;
    g.seed = seed;
    std::uniform_int_distribution<std::size_t> states(c.min_states, c.max_states);
    const std::size_t n = states(rng);
    g.model_spec.states = n;
    g.model_spec.horizon = c.horizon;
    g.model_spec.schedule.push_back(RateSegment{0.0, random_rates(n, c.rate_scale, rng)});
    if (unit(rng) < 0.5) {
        g.model_spec.schedule.push_back(
            RateSegment{0.5 * c.horizon, random_rates(n, c.rate_scale, rng)});
    }
    const ChainModel model = build_model(g.model_spec);

    auto& d = g.driver_spec;
    d.a = uniform(-c.lipschitz_y_cap, c.lipschitz_y_cap);
    if (c.linear_driver) {
        d.family = "linear";
    } else {
        d.family = "affine";
        const double per_unit = assumption_margin(model, 1.0);
        if (c.z_lipschitz) {
            d.b = *c.z_lipschitz;
        } else if (per_unit > 0.0) {
            const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
            d.b = sign * uniform(0.0, c.margin_target) / per_unit;
        }
        for (std::size_t i = 0; i < n; ++i) {
            d.alpha.push_back(uniform(-1.0, 1.0));
            d.beta.push_back(uniform(-0.5, 0.5));
        }
    }
    g.margin = assumption_margin(model, std::abs(d.b));

    for (std::size_t i = 0; i < n; ++i) g.terminal.push_back(uniform(-0.5, 0.5));

    // G_i(t) = xi_i - gap_i + slope_i (T - t), compatible at T by construction.
    auto& o = g.obstacle_spec;
    o.family = "affine";
    for (std::size_t i = 0; i < n; ++i) {
        o.offset.push_back(g.terminal[i] - uniform(0.0, 0.3));
        o.slope.push_back(c.obstacle_active ? uniform(0.5, 1.5) : uniform(-1.0, 1.0));
    }
    return g;
}

// Largest push the obstacle could demand: max over t, i of (-dG/dt - f(t, G, G) - (A'G)_i)^+.
double push_bound(const RbsdeInstance& inst) {
    const auto times = uniform_grid(inst.model.horizon(), 200);
    const Matrix g = sample_obstacle(inst.obstacle, times, inst.model.states());
    const double h = times[1] - times[0];
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        const Vector gk = g.row(row).transpose();
        const Vector dg = (g.row(row + 1) - g.row(row)).transpose() / h;
        const Matrix& rates = inst.model.rates_at(times[k]);
        const Vector flow = rates.transpose() * gk;
        for (Eigen::Index i = 0; i < gk.size(); ++i) {
            const double f = inst.driver(times[k], gk(i), gk, static_cast<std::size_t>(i), rates);
            worst = std::max(worst, -dg(i) - f - flow(i));
        }
    }
    return worst;
}

bool obstacle_bites(const GeneratedInstance& g) {
    const RbsdeInstance inst = g.build();
    const ValueGrid free = solve_bsde(inst.model, inst.driver, inst.xi, 200);
    const Matrix obstacle = sample_obstacle(inst.obstacle, free.times, inst.model.states());
    return (obstacle - free.values).maxCoeff() > 0.05;
}

}  // namespace

GeneratorConstraints constraints_from(const GeneratorSpec& spec) {
    GeneratorConstraints c;
    c.min_states = spec.min_states;
    c.max_states = spec.max_states;
    c.rate_scale = spec.rate_scale;
    c.horizon = spec.horizon;
    c.lipschitz_y_cap = spec.lipschitz_y_cap;
    c.margin_target = spec.margin_target;
    return c;
}

RbsdeInstance GeneratedInstance::build() const {
    ChainModel model = build_model(model_spec);
    Driver driver = build_driver(driver_spec, model_spec.states);
    Obstacle obstacle = build_obstacle(obstacle_spec, model_spec.states, model_spec.horizon);
    Vector xi = build_terminal(terminal, model_spec.states);
    return RbsdeInstance{std::move(model), std::move(driver), std::move(obstacle), std::move(xi)};
}

GeneratedInstance generate_instance(std::uint64_t seed, const GeneratorConstraints& c) {
    if (c.min_states < 1 || c.min_states > c.max_states)
        throw Error(ErrorCode::ConstraintUnsatisfiable, "empty state range");
    if (!(c.margin_target > 0.0 && c.margin_target < 1.0))
        throw Error(ErrorCode::ConstraintUnsatisfiable, "margin target must lie in (0, 1)");
    if (!(c.rate_scale > 0.0) || !(c.horizon > 0.0))
        throw Error(ErrorCode::ConstraintUnsatisfiable, "rate scale and horizon must be positive");

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        GeneratedInstance g = draw(seed, static_cast<std::uint64_t>(attempt), c);
        if (c.z_lipschitz && g.margin >= 1.0) {
            std::ostringstream os;
            os << "b = " << *c.z_lipschitz << " gives assumption margin " << g.margin << " >= 1";
            throw Error(ErrorCode::ConstraintUnsatisfiable, os.str());
        }
        if (push_bound(g.build()) > kMaxPush) continue;
        if (!c.obstacle_active || obstacle_bites(g)) return g;
    }
    throw Error(ErrorCode::ConstraintUnsatisfiable,
                "no instance with an active, moderate obstacle within the attempt budget");
}

GeneratedPair generate_pair(std::uint64_t seed, const GeneratorConstraints& c, bool invert) {
    GeneratedPair pair{generate_instance(seed, c), {}};
    pair.upper = pair.lower;

    auto rng = substream(seed, 1000);
    std::uniform_real_distribution<double> shift(0.0, 0.5);
    std::uniform_real_distribution<double> bump(0.05, 0.5);
    const std::size_t n = pair.lower.model_spec.states;
    auto& upper_driver = pair.upper.driver_spec;
    if (upper_driver.family == "linear") {
        upper_driver.family = "affine";
        upper_driver.alpha.assign(n, 0.0);
        upper_driver.beta.assign(n, 0.0);
        pair.lower.driver_spec = upper_driver;
    }
    for (std::size_t i = 0; i < n; ++i) {
        upper_driver.alpha[i] += shift(rng);
        pair.upper.terminal[i] += bump(rng);
    }
    if (invert) std::swap(pair.lower.terminal, pair.upper.terminal);
    return pair;
}

}  // namespace chainbsde
