#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace chainbsde {

inline constexpr const char* kVersion = "0.1.0";

enum class Relation { AtMost, AtLeast, Below, Above };

/// One measured quantity against its pinned threshold.
struct SubCheck {
    std::string label;
    double value = 0.0;
    double threshold = 0.0;
    Relation relation = Relation::AtMost;

    [[nodiscard]] bool passed() const noexcept;
};

/// One acceptance criterion. The headline statistic is the first sub-check;
/// the row passes iff every sub-check passes.
struct ReportRow {
    std::string suite;
    std::string anchor;
    std::uint64_t seed = 0;
    std::vector<SubCheck> checks;

    [[nodiscard]] bool passed() const noexcept;
};

struct SuiteReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    double assumption_margin = 0.0;

    [[nodiscard]] bool passed() const noexcept;
};

[[nodiscard]] std::string_view to_string(Relation relation) noexcept;
[[nodiscard]] std::string render_text(const SuiteReport& report);
[[nodiscard]] nlohmann::json render_json(const SuiteReport& report);

}  // namespace chainbsde
