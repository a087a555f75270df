#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "chainbsde/bsde.hpp"
#include "chainbsde/error.hpp"

using namespace chainbsde;

namespace {

Matrix two_state(double out0, double out1) {
    Matrix a(2, 2);
    a << -out0, out1, out0, -out1;
    return a;
}

double sup_error(const ValueGrid& g, const std::function<Vector(double)>& exact) {
    double worst = 0.0;
    for (std::size_t k = 0; k < g.times.size(); ++k)
        worst = std::max(worst, (g.z(k) - exact(g.times[k])).cwiseAbs().maxCoeff());
    return worst;
}

}  // namespace

TEST(SolveBsde, ConstantsAreSolutions) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    const ValueGrid g = solve_bsde(m, zero_driver(), Vector::Constant(2, 3.5), 100);
    EXPECT_LE((g.values.array() - 3.5).abs().maxCoeff(), 1e-13);
    EXPECT_EQ(g.steps(), 100u);
    EXPECT_EQ(g.states(), 2u);
    EXPECT_DOUBLE_EQ(g.horizon(), 1.0);
}

TEST(SolveBsde, DiscountedConstant) {
    const double r = 0.7, c = 2.0, T = 1.5;
    const ChainModel m = constant_model(two_state(1.0, 3.0), T);
    const ValueGrid g = solve_bsde(m, linear_driver(-r), Vector::Constant(2, c), 1000);
    const double err = sup_error(g, [&](double t) { return Vector::Constant(2, c * std::exp(-r * (T - t))); });
    EXPECT_LE(err, 1e-8);
}

TEST(SolveBsde, TwoStateMatrixExponential) {
    const ChainModel m = constant_model(two_state(1.0, 1.0), 1.0);
    Vector xi(2);
    xi << 1, 0;
    const ValueGrid g = solve_bsde(m, zero_driver(), xi, 1000);
    const double err = sup_error(g, [](double t) {
        const double e = std::exp(-2.0 * (1.0 - t));
        Vector u(2);
        u << (1 + e) / 2, (1 - e) / 2;
        return u;
    });
    EXPECT_LE(err, 1e-8);
}

TEST(SolveBsde, PiecewiseScheduleMatchesExpm) {
    Matrix a0(3, 3), a1(3, 3);
    a0 << -1.0, 0.5, 0.2, 0.6, -1.0, 0.3, 0.4, 0.5, -0.5;
    a1 << -2.0, 1.0, 0.5, 1.0, -1.5, 0.5, 1.0, 0.5, -1.0;
    const ChainModel m = validate_model({{0.0, a0}, {0.3, a1}}, 3, 1.0);
    Vector xi(3);
    xi << 1.0, -0.5, 0.25;
    const ValueGrid g = solve_bsde(m, zero_driver(), xi, 1000);
    const double err = sup_error(g, [&](double t) {
        if (t >= 0.3) return Vector((a1.transpose() * (1.0 - t)).exp() * xi);
        const Vector mid = (a1.transpose() * 0.7).exp() * xi;
        return Vector((a0.transpose() * (0.3 - t)).exp() * mid);
    });
    EXPECT_LE(err, 1e-9);
}

TEST(SolveBsde, FourthOrderConvergence) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    Vector xi(2);
    xi << 1, -1;
    const Matrix at = m.rates_at(0).transpose();
    auto exact = [&](double t) { return Vector((at * (1.0 - t)).exp() * xi); };
    const double e1 = sup_error(solve_bsde(m, zero_driver(), xi, 10), exact);
    const double e2 = sup_error(solve_bsde(m, zero_driver(), xi, 20), exact);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
}

TEST(SolveBsdeEuler, FirstOrderConvergence) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    Vector xi(2);
    xi << 1, -1;
    const Matrix at = m.rates_at(0).transpose();
    auto exact = [&](double t) { return Vector((at * (1.0 - t)).exp() * xi); };
    const double e1 = sup_error(solve_bsde_euler(m, zero_driver(), xi, 200), exact);
    const double e2 = sup_error(solve_bsde_euler(m, zero_driver(), xi, 400), exact);
    EXPECT_NEAR(e1 / e2, 2.0, 0.1);
}

TEST(SolveBsde, NonlinearDriverMatchesFineEuler) {
    const ChainModel m = constant_model(two_state(1.5, 0.5), 1.0);
    Vector alpha(2), beta(2), xi(2);
    alpha << 0.3, -0.2;
    beta << 0.1, 0.4;
    xi << 0.5, -0.5;
    const Driver f = affine_driver(0.4, -0.3, alpha, beta);
    const ValueGrid rk = solve_bsde(m, f, xi, 200);
    const ValueGrid eu = solve_bsde_euler(m, f, xi, 200 * 256);
    double worst = 0.0;
    for (std::size_t k = 0; k < rk.times.size(); ++k)
        worst = std::max(worst, (rk.z(k) - eu.z(k * 256)).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-4);
}

TEST(SolveBsde, NonFiniteIsReported) {
    const ChainModel m = constant_model(two_state(1.0, 1.0), 1.0);
    Driver blow = constant_driver(0.0);
    blow.eval = [](double, double y, const Vector&, std::size_t, const Matrix&) { return y * y * 1e200; };
    try {
        (void)solve_bsde(m, blow, Vector::Constant(2, 1e100), 10);
        FAIL() << "expected NonFinite";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
}

TEST(SolveBsde, BreakpointsLandOnNodes) {
    Matrix a = two_state(1.0, 1.0);
    const ChainModel m = validate_model({{0.0, a}, {1.0 / 3.0, a}}, 2, 1.0);
    const std::size_t steps = snap_steps(m, 100);
    EXPECT_GE(steps, 100u);
    EXPECT_NEAR(std::round(steps / 3.0) * 3.0, static_cast<double>(steps), 0.0);
}

TEST(Drivers, DeclaredLipschitzConstantsHold) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    Vector alpha = Vector::Constant(2, 0.5), beta = Vector::Constant(2, -1.0);
    EXPECT_LE(lipschitz_probe(m, affine_driver(0.3, 0.7, alpha, beta), 2000, 1), 1.0 + 1e-12);
    EXPECT_LE(lipschitz_probe(m, linear_driver(-2.0), 2000, 2), 1.0 + 1e-12);
    Driver lying = affine_driver(0.3, 0.7, alpha, beta);
    lying.lipschitz_z = 0.1;
    EXPECT_GT(lipschitz_probe(m, lying, 2000, 3), 1.0);
}

TEST(Drivers, ForcingIsAdded) {
    const Driver f = with_forcing(constant_driver(1.0), [](double t, std::size_t i) { return t + i; });
    const Matrix a = two_state(1.0, 1.0);
    EXPECT_DOUBLE_EQ(f(0.5, 0.0, Vector::Zero(2), 1, a), 2.5);
    EXPECT_NE(affine_driver(0.1, 0.2, Vector::Zero(2), Vector::Zero(2)).family,
              affine_driver(0.1, 0.3, Vector::Zero(2), Vector::Zero(2)).family);
}

TEST(ValueGrid, InterpolatesLinearly) {
    ValueGrid g;
    g.times = {0.0, 1.0};
    g.values.resize(2, 1);
    g.values << 1.0, 3.0;
    EXPECT_DOUBLE_EQ(g.at(0.25, 0), 1.5);
    EXPECT_DOUBLE_EQ(g.at(1.0, 0), 3.0);
}

TEST(WriteCsv, HeaderAndRoundTrip) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    const ValueGrid g = solve_bsde(m, zero_driver(), Vector::LinSpaced(2, 0.1, 0.7), 3);
    std::ostringstream os;
    write_csv(os, g);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,u_1,u_2");
    int rows = 0;
    while (std::getline(in, line)) {
        double t = 0, u1 = 0, u2 = 0;
        char c1 = 0, c2 = 0;
        std::istringstream(line) >> t >> c1 >> u1 >> c2 >> u2;
        EXPECT_EQ(t, g.times[static_cast<std::size_t>(rows)]);
        EXPECT_EQ(u1, g.values(rows, 0));
        EXPECT_EQ(u2, g.values(rows, 1));
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}

TEST(PathEvaluation, ConstantSolution) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    const ValueGrid g = solve_bsde(m, zero_driver(), Vector::Constant(2, 2.0), 50);
    const ChainPath p = simulate_path(m, 0, 4, 0);
    const PathEvaluation ev = evaluate_on_path(m, g, p);
    for (double y : ev.y) EXPECT_NEAR(y, 2.0, 1e-13);
    for (double s : ev.integral) EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(PathEvaluation, JumpFreePathIsCompensatorOnly) {
    const Matrix a = two_state(1.0, 2.0);
    const ChainModel m = constant_model(a, 1.0);
    Vector xi(2);
    xi << 1, 0;
    const ValueGrid g = solve_bsde(m, zero_driver(), xi, 20);
    const ChainPath p{0, {}, 1.0};
    const PathEvaluation ev = evaluate_on_path(m, g, p);
    double expected = 0.0;
    for (std::size_t k = 0; k < 20; ++k) expected -= g.z(k).dot(a.col(0)) * 0.05;
    EXPECT_NEAR(ev.integral.back(), expected, 1e-12);
}

TEST(ResidualCheck, ZeroForConstants) {
    const ChainModel m = constant_model(two_state(1.0, 2.0), 1.0);
    const Vector xi = Vector::Constant(2, -1.0);
    const ValueGrid g = solve_bsde(m, zero_driver(), xi, 100);
    for (std::uint64_t s = 0; s < 20; ++s)
        EXPECT_LE(residual_check(m, g, simulate_path(m, 1, 8, s), zero_driver(), xi), 1e-12);
}

TEST(ResidualCheck, OracleInstanceConverges) {
    const ChainModel m = constant_model(two_state(1.0, 1.0), 1.0);
    Vector xi(2);
    xi << 1, 0;
    const ValueGrid g = solve_bsde(m, zero_driver(), xi, 2000);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s)
        worst = std::max(worst, residual_check(m, g, simulate_path(m, 0, 12, s), zero_driver(), xi));
    EXPECT_LE(worst, 1e-3);
}

TEST(ResidualCheck, NonlinearDriver) {
    const ChainModel m = validate_model({{0.0, two_state(1.0, 2.0)}, {0.5, two_state(0.5, 1.5)}}, 2, 1.0);
    Vector alpha(2), beta(2), xi(2);
    alpha << 0.3, -0.2;
    beta << 0.1, 0.4;
    xi << 0.5, -0.5;
    const Driver f = affine_driver(0.4, -0.3, alpha, beta);
    const ValueGrid g = solve_bsde(m, f, xi, 2000);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s)
        worst = std::max(worst, residual_check(m, g, simulate_path(m, 0, 13, s), f, xi));
    EXPECT_LE(worst, 1e-3);
}

TEST(ResidualCheck, DetectsCorruption) {
    const ChainModel m = constant_model(two_state(1.0, 1.0), 1.0);
    Vector xi(2);
    xi << 1, 0;
    ValueGrid g = solve_bsde(m, zero_driver(), xi, 200);
    g.values.row(100).array() += 1.0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s)
        worst = std::max(worst, residual_check(m, g, simulate_path(m, 0, 14, s), zero_driver(), xi));
    EXPECT_GE(worst, 0.5);
}
