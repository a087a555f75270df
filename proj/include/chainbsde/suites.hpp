#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "chainbsde/config.hpp"
#include "chainbsde/report.hpp"

namespace chainbsde {

/// Suite names in report order; "all" selects every one of them.
inline constexpr std::array<std::string_view, 11> kSuiteNames = {
    "seminorm",   "pseudoinverse",         "bsde-oracle", "isometry",
    "bracket",    "stationary-obstacle",   "monotonicity", "comparison",
    "estimate",   "continuous-dependence", "skorokhod",
};

[[nodiscard]] bool is_suite(std::string_view name) noexcept;

/// Runs one suite and returns its row. Throws ConfigError for unknown names;
/// solver errors propagate with the instance seed in the message.
[[nodiscard]] ReportRow run_one(std::string_view name, const ExperimentConfig& config);

/// Runs the selected suites (empty selection gives an empty, passing report).
[[nodiscard]] SuiteReport run_suite(const ExperimentConfig& config,
                                    const std::vector<std::string>& selection);

/// Log-log least-squares slope of y against x.
[[nodiscard]] double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// max / min of a list of positive ratios.
[[nodiscard]] double ratio_spread(const std::vector<double>& ratios);

}  // namespace chainbsde
