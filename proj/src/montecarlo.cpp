#include "chainbsde/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace chainbsde {

SampleStats summarize(std::span<const double> samples, std::uint64_t seed) {
    SampleStats stats;
    stats.paths = samples.size();
    stats.seed = seed;
    if (samples.empty()) return stats;
    double sum = 0.0;
    for (double x : samples) sum += x;
    const double n = static_cast<double>(samples.size());
    stats.mean = sum / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double x : samples) ss += (x - stats.mean) * (x - stats.mean);
        stats.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return stats;
}

double zscore(double difference, double error) {
    const double d = std::abs(difference);
    if (error > 0.0) return d / error;
    return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

SampleStats expectation_on_paths(const ChainModel& model, const PathFunctional& functional,
                                 std::size_t x0, std::size_t paths, std::uint64_t seed) {
    std::vector<double> values(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        values[p] = functional(simulate_path(model, x0, seed, p));
    }
    return summarize(values, seed);
}

PathIntegral integrate_on_path(const ChainModel& model, const ZField& z, const ChainPath& path,
                               std::span<const double> grid) {
    PathIntegral out;
    auto jump = path.jumps.begin();
    std::size_t state = path.initial;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t0 = grid[k];
        const double t1 = grid[k + 1];
        double t = t0;
        std::size_t seg = model.segment_index(t0);
        while (t < t1) {
            const Matrix& rates = model.schedule()[seg].rates;
            double next = std::min(t1, model.segment_end(seg));
            const bool jumps_here = jump != path.jumps.end() && jump->time <= next;
            if (jumps_here) next = jump->time;
            // Left-node time, current (pre-jump) state: predictable.
            const Vector zv = z(t0, state);
            const auto i = static_cast<Eigen::Index>(state);
            out.integral -= (next - t) * zv.dot(rates.col(i));
            out.energy += (next - t) * seminorm_sq(rates, state, zv);
            t = next;
            if (jumps_here) {
                out.integral += zv(static_cast<Eigen::Index>(jump->state)) - zv(i);
                state = jump->state;
                ++jump;
            }
            if (seg + 1 < model.schedule().size() && model.segment_end(seg) <= t) ++seg;
        }
    }
    return out;
}

IsometryResult isometry_check(const ChainModel& model, const ZField& z, std::size_t x0,
                              std::size_t paths, std::span<const double> grid,
                              std::uint64_t seed) {
    std::vector<double> lhs(paths), rhs(paths), diff(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        const PathIntegral pi = integrate_on_path(model, z, simulate_path(model, x0, seed, p), grid);
        lhs[p] = pi.integral * pi.integral;
        rhs[p] = pi.energy;
        diff[p] = lhs[p] - rhs[p];
    }
    IsometryResult result{summarize(lhs, seed), summarize(rhs, seed), 0.0};
    const SampleStats d = summarize(diff, seed);
    result.zscore = zscore(d.mean, d.std_error);
    return result;
}

BracketResult bracket_check(const ChainModel& model, std::size_t x0, std::size_t paths,
                            std::uint64_t seed, const PsiFn& psi_fn) {
    const auto n = static_cast<Eigen::Index>(model.states());
    const auto& schedule = model.schedule();
    // Compensator densities per (segment, state), computed once.
    std::vector<std::vector<Matrix>> density(schedule.size());
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        for (std::size_t i = 0; i < model.states(); ++i) {
            density[s].push_back(psi_fn(schedule[s].rates, i));
        }
    }

    Matrix sum = Matrix::Zero(n, n);
    Matrix sum_sq = Matrix::Zero(n, n);
    Matrix l(n, n);
    for (std::size_t p = 0; p < paths; ++p) {
        const ChainPath path = simulate_path(model, x0, seed, p);
        l.setZero();
        std::size_t state = path.initial;
        for (const Jump& j : path.jumps) {
            const auto a = static_cast<Eigen::Index>(state);
            const auto b = static_cast<Eigen::Index>(j.state);
            l(a, a) += 1.0;
            l(b, b) += 1.0;
            l(a, b) -= 1.0;
            l(b, a) -= 1.0;
            state = j.state;
        }
        // Subtract int Psi(X_s) ds over pieces of constant state and segment.
        auto jump = path.jumps.begin();
        state = path.initial;
        double t = 0.0;
        std::size_t seg = 0;
        while (t < model.horizon()) {
            double next = model.segment_end(seg);
            const bool jumps_here = jump != path.jumps.end() && jump->time < next;
            if (jumps_here) next = jump->time;
            l -= (next - t) * density[seg][state];
            t = next;
            if (jumps_here) {
                state = jump->state;
                ++jump;
            } else if (seg + 1 < schedule.size()) {
                ++seg;
            }
        }
        sum += l;
        sum_sq += l.cwiseProduct(l);
    }

    BracketResult result;
    const double count = static_cast<double>(paths);
    result.mean = sum / count;
    result.std_error = Matrix::Zero(n, n);
    result.zscores = Matrix::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            if (paths > 1) {
                const double var =
                    std::max(0.0, (sum_sq(r, c) - count * result.mean(r, c) * result.mean(r, c)) /
                                      (count - 1.0));
                result.std_error(r, c) = std::sqrt(var / count);
            }
            result.zscores(r, c) = zscore(result.mean(r, c), result.std_error(r, c));
            result.max_zscore = std::max(result.max_zscore, result.zscores(r, c));
        }
    }
    return result;
}

}  // namespace chainbsde
