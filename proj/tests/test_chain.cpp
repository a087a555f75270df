#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chainbsde/chain.hpp"
#include "chainbsde/error.hpp"
#include "chainbsde/montecarlo.hpp"

using namespace chainbsde;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

const Matrix kA = rows({{-1, 2}, {1, -2}});
const Matrix kSym = rows({{-1, 1}, {1, -1}});

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no Error thrown";
    return ErrorCode::ConfigError;
}

Matrix random_generator(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rate(0.0, 2.0);
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (i != j) a(i, j) = rate(rng);
        a(j, j) = -a.col(j).sum();
    }
    return a;
}

// Direct matrix arithmetic for diag(Ae) - diag(e)A' - A diag(e).
Matrix psi_oracle(const Matrix& a, std::size_t i) {
    Vector e = Vector::Zero(a.rows());
    e(static_cast<Eigen::Index>(i)) = 1.0;
    Matrix d = e.asDiagonal();
    Matrix ae = (a * e).asDiagonal();
    return ae - d * a.transpose() - a * d;
}

}  // namespace

TEST(ValidateModel, SpectralNormMatchesSingularValues) {
    const ChainModel m = constant_model(kA, 1.0);
    const double svd = Eigen::JacobiSVD<Matrix>(kA).singularValues()(0);
    EXPECT_NEAR(m.rate_bound(), std::sqrt(10.0), 1e-12);
    EXPECT_NEAR(m.rate_bound(), svd, 1e-12);
}

TEST(ValidateModel, ZeroGenerator) {
    const ChainModel m = constant_model(Matrix::Zero(2, 2), 1.0);
    EXPECT_EQ(m.rate_bound(), 0.0);
}

TEST(ValidateModel, RejectsBadData) {
    EXPECT_EQ(code_of([] { (void)constant_model(rows({{-1, 0}, {2, 0}}), 1.0); }),
              ErrorCode::BadColumnSum);
    EXPECT_EQ(code_of([] { (void)constant_model(rows({{1, 0}, {-1, 0}}), 1.0); }),
              ErrorCode::NegativeRate);
    EXPECT_EQ(code_of([] { (void)validate_model({}, 2, 1.0); }), ErrorCode::EmptySchedule);
    EXPECT_EQ(code_of([] { (void)validate_model({{0.0, kA}, {0.0, kA}}, 2, 1.0); }),
              ErrorCode::BadSchedule);
    EXPECT_EQ(code_of([] { (void)validate_model({{0.1, kA}}, 2, 1.0); }), ErrorCode::BadSchedule);
    EXPECT_EQ(code_of([] { (void)validate_model({{0.0, kA}, {1.0, kA}}, 2, 1.0); }),
              ErrorCode::BadSchedule);
    EXPECT_EQ(code_of([] { (void)validate_model({{0.0, kA}}, 3, 1.0); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([] { (void)constant_model(kA, 0.0); }), ErrorCode::BadSchedule);
}

TEST(ValidateModel, SegmentLookup) {
    const ChainModel m = validate_model({{0.0, kA}, {0.5, kSym}}, 2, 1.0);
    EXPECT_EQ(m.segment_index(0.0), 0u);
    EXPECT_EQ(m.segment_index(0.4999), 0u);
    EXPECT_EQ(m.segment_index(0.5), 1u);
    EXPECT_EQ(m.segment_index(1.0), 1u);
    EXPECT_EQ(m.segment_end(0), 0.5);
    EXPECT_EQ(m.segment_end(1), 1.0);
    EXPECT_NEAR(m.rate_bound(), std::sqrt(10.0), 1e-12);
}

TEST(Psi, TwoStateExamples) {
    EXPECT_TRUE(psi_from_rates(kA, 0).isApprox(rows({{1, -1}, {-1, 1}})));
    EXPECT_TRUE(psi_from_rates(kA, 1).isApprox(rows({{2, -2}, {-2, 2}})));
    EXPECT_TRUE(psi_from_rates(Matrix::Zero(3, 3), 2).isZero());
    const ChainModel m = validate_model({{0.0, kA}, {0.5, kSym}}, 2, 1.0);
    EXPECT_TRUE(psi(m, 0.75, 1).entries.isApprox(rows({{1, -1}, {-1, 1}})));
}

TEST(Psi, MatchesMatrixArithmetic) {
    auto rng = substream(7, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
        const Matrix a = random_generator(n, rng);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_LE((psi_from_rates(a, i) - psi_oracle(a, i)).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(Seminorm, Examples) {
    Vector c(2);
    c << 3, 1;
    EXPECT_DOUBLE_EQ(seminorm_sq(kA, 0, c), 4.0);
    EXPECT_EQ(seminorm_sq(kA, 1, Vector::Constant(2, 5.0)), 0.0);
    EXPECT_EQ(seminorm_sq(Matrix::Zero(2, 2), 0, c), 0.0);
    const ChainModel m = constant_model(kA, 1.0);
    EXPECT_DOUBLE_EQ(seminorm_sq(m, 0.3, 0, c), 4.0);
}

TEST(Seminorm, EqualsQuadraticForm) {
    auto rng = substream(8, 0);
    std::uniform_real_distribution<double> coeff(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
        const Matrix a = random_generator(n, rng);
        Vector c(static_cast<Eigen::Index>(n));
        for (auto& x : c) x = coeff(rng);
        const std::size_t i = static_cast<std::size_t>(trial) % n;
        const double quad = c.dot(psi_oracle(a, i) * c);
        EXPECT_NEAR(seminorm_sq(a, i, c), quad, 1e-10 * (1.0 + std::abs(quad)));
        EXPECT_GE(seminorm_sq(a, i, c), 0.0);
    }
}

TEST(Pseudoinverse, Examples) {
    EXPECT_TRUE(pseudoinverse(rows({{1, -1}, {-1, 1}}))
                    .isApprox(rows({{0.25, -0.25}, {-0.25, 0.25}}), 1e-14));
    EXPECT_TRUE(pseudoinverse(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
    EXPECT_TRUE(pseudoinverse(Matrix::Zero(3, 3)).isZero());
    EXPECT_EQ(code_of([] { (void)pseudoinverse(rows({{1, 2}, {0, 1}})); }), ErrorCode::NotSymmetric);
}

TEST(Pseudoinverse, AgreesWithSvd) {
    auto rng = substream(9, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
        const Matrix p = psi_oracle(random_generator(n, rng), 0);
        Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
        svd.setThreshold(1e-12);
        Vector inv = svd.singularValues();
        for (auto& s : inv) s = s > 1e-12 * svd.singularValues()(0) ? 1.0 / s : 0.0;
        const Matrix oracle = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
        EXPECT_LE((pseudoinverse(p) - oracle).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(moore_penrose_defect(p, pseudoinverse(p)), 1e-10);
    }
}

TEST(Pseudoinverse, DefectDetectsWrongInverse) {
    const Matrix p = rows({{1, -1}, {-1, 1}});
    EXPECT_GT(moore_penrose_defect(p, Matrix::Identity(2, 2)), 0.1);
}

TEST(AssumptionMargin, Examples) {
    const ChainModel m = constant_model(kA, 1.0);
    const double expected = 0.2 * 0.5 * std::sqrt(6.0 * std::sqrt(10.0));
    EXPECT_NEAR(assumption_margin(m, 0.2), expected, 1e-12);
    EXPECT_NEAR(expected, 0.4356, 1e-4);
    EXPECT_EQ(assumption_margin(m, 0.0), 0.0);
    EXPECT_EQ(assumption_margin(constant_model(Matrix::Zero(2, 2), 1.0), 1.0), 0.0);
}

TEST(Simulation, ZeroGeneratorHasNoJumps) {
    const ChainModel m = constant_model(Matrix::Zero(3, 3), 2.0);
    const ChainPath p = simulate_path(m, 1, 42, 0);
    EXPECT_TRUE(p.jumps.empty());
    EXPECT_EQ(p.state_at(1.7), 1u);
    EXPECT_EQ(p.terminal(), 1u);
}

TEST(Simulation, SameSeedSamePath) {
    const ChainModel m = constant_model(kA, 3.0);
    const ChainPath a = simulate_path(m, 0, 5, 11);
    const ChainPath b = simulate_path(m, 0, 5, 11);
    ASSERT_EQ(a.jumps.size(), b.jumps.size());
    for (std::size_t k = 0; k < a.jumps.size(); ++k) {
        EXPECT_EQ(a.jumps[k].time, b.jumps[k].time);
        EXPECT_EQ(a.jumps[k].state, b.jumps[k].state);
    }
}

TEST(Simulation, JumpsAreOrderedAndMoveState) {
    const ChainModel m = validate_model({{0.0, kA}, {0.5, kSym}}, 2, 1.0);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const ChainPath p = simulate_path(m, 0, 3, s);
        std::size_t state = p.initial;
        double last = 0.0;
        for (const auto& j : p.jumps) {
            EXPECT_GT(j.time, last);
            EXPECT_LT(j.time, 1.0);
            EXPECT_NE(j.state, state);
            EXPECT_EQ(p.state_before(j.time), state);
            EXPECT_EQ(p.state_at(j.time), j.state);
            state = j.state;
            last = j.time;
        }
    }
}

TEST(Simulation, TwoStateTransitionProbability) {
    const ChainModel m = constant_model(kSym, 1.0);
    const SampleStats s = expectation_on_paths(
        m, [](const ChainPath& p) { return p.terminal() == 1 ? 1.0 : 0.0; }, 0, 100000, 2024);
    const double exact = (1.0 - std::exp(-2.0)) / 2.0;
    EXPECT_NEAR(exact, 0.43233, 1e-5);
    EXPECT_LE(zscore(s.mean - exact, s.std_error), 4.0);
}

TEST(Simulation, LongRunOccupation) {
    const double horizon = 2000.0;
    const ChainModel m = constant_model(kA, horizon);
    const ChainPath p = simulate_path(m, 1, 99, 0);
    double in_first = 0.0, t = 0.0;
    std::size_t state = p.initial;
    for (const auto& j : p.jumps) {
        if (state == 0) in_first += j.time - t;
        t = j.time;
        state = j.state;
    }
    if (state == 0) in_first += horizon - t;
    EXPECT_NEAR(in_first / horizon, 2.0 / 3.0, 0.02);
}

TEST(Martingale, ZeroGeneratorIncrementsVanish) {
    const ChainModel m = constant_model(Matrix::Zero(2, 2), 1.0);
    const ChainPath p = simulate_path(m, 0, 1, 0);
    for (const auto& d : martingale_increments(m, p, uniform_grid(1.0, 10))) EXPECT_TRUE(d.isZero());
}

TEST(Martingale, JumpFreeCellIsPureCompensator) {
    const ChainModel m = constant_model(kA, 1.0);
    ChainPath p{0, {}, 1.0};
    const auto grid = uniform_grid(1.0, 4);
    const auto inc = martingale_increments(m, p, grid);
    ASSERT_EQ(inc.size(), 4u);
    for (const auto& d : inc) EXPECT_TRUE(d.isApprox(-0.25 * kA.col(0)));
}

TEST(Martingale, IncrementsTelescope) {
    const ChainModel m = validate_model({{0.0, kA}, {0.3, kSym}}, 2, 1.0);
    const auto grid = uniform_grid(1.0, 7);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const ChainPath p = simulate_path(m, 1, 17, s);
        Vector total = Vector::Zero(2);
        for (const auto& d : martingale_increments(m, p, grid)) total += d;
        Vector x0 = Vector::Zero(2), xt = Vector::Zero(2);
        x0(static_cast<Eigen::Index>(p.initial)) = 1.0;
        xt(static_cast<Eigen::Index>(p.terminal())) = 1.0;
        const Vector expected = xt - x0 - compensator(m, p, 0.0, 1.0);
        EXPECT_LE((total - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Martingale, CompensatorHasMeanOfJumps) {
    // E[X_T - X_0] = E int A X ds, so the increments average to zero.
    const ChainModel m = constant_model(kA, 1.0);
    const SampleStats s = expectation_on_paths(
        m,
        [&](const ChainPath& p) {
            Vector t = Vector::Zero(2);
            for (const auto& d : martingale_increments(m, p, uniform_grid(1.0, 5))) t += d;
            return t(0);
        },
        0, 20000, 31);
    EXPECT_LE(zscore(s.mean, s.std_error), 4.0);
}

TEST(ForwardLaw, MatchesMatrixExponential) {
    const ChainModel m = constant_model(kA, 1.0);
    Vector p0(2);
    p0 << 1, 0;
    const auto grid = uniform_grid(1.0, 100);
    const Matrix law = forward_law(m, p0, grid);
    // Two-state closed form: p_0(t) = 2/3 + (1/3) e^{-3t}.
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double exact = 2.0 / 3.0 + std::exp(-3.0 * grid[k]) / 3.0;
        EXPECT_NEAR(law(static_cast<Eigen::Index>(k), 0), exact, 1e-9);
        EXPECT_NEAR(law.row(static_cast<Eigen::Index>(k)).sum(), 1.0, 1e-12);
    }
}

TEST(ForwardLaw, TailSecondMomentMatchesMonteCarlo) {
    const ChainModel m = validate_model({{0.0, kA}, {0.5, kSym}}, 2, 1.0);
    const auto grid = uniform_grid(1.0, 200);
    Matrix d(static_cast<Eigen::Index>(grid.size()), 2);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        d(static_cast<Eigen::Index>(k), 0) = 1.0 + grid[k];
        d(static_cast<Eigen::Index>(k), 1) = -2.0;
    }
    Vector p0(2);
    p0 << 0, 1;
    const double exact = tail_integral_second_moment(m, p0, grid, d).front();
    const SampleStats s = expectation_on_paths(
        m,
        [&](const ChainPath& p) {
            double total = 0.0, t = 0.0;
            std::size_t state = p.initial;
            auto piece = [&](double a, double b) {
                return state == 0 ? (b - a) + 0.5 * (b * b - a * a) : -2.0 * (b - a);
            };
            for (const auto& j : p.jumps) {
                total += piece(t, j.time);
                t = j.time;
                state = j.state;
            }
            total += piece(t, 1.0);
            return total * total;
        },
        1, 50000, 77);
    EXPECT_LE(zscore(s.mean - exact, s.std_error), 4.0);
}
