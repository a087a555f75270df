#include "chainbsde/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace chainbsde {

bool SubCheck::passed() const noexcept {
    if (std::isnan(value)) return false;
    switch (relation) {
        case Relation::AtMost: return value <= threshold;
        case Relation::AtLeast: return value >= threshold;
        case Relation::Below: return value < threshold;
        case Relation::Above: return value > threshold;
    }
    return false;
}

bool ReportRow::passed() const noexcept {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const SubCheck& c) { return c.passed(); });
}

bool SuiteReport::passed() const noexcept {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.passed(); });
}

std::string_view to_string(Relation relation) noexcept {
    switch (relation) {
        case Relation::AtMost: return "<=";
        case Relation::AtLeast: return ">=";
        case Relation::Below: return "<";
        case Relation::Above: return ">";
    }
    return "?";
}

std::string render_text(const SuiteReport& report) {
    std::ostringstream os;
    os << "chainbsde " << kVersion << "  seed=" << report.seed
       << "  assumption_margin=" << std::setprecision(6) << report.assumption_margin << '\n';
    for (const auto& w : report.warnings) os << "warning: " << w << '\n';
    for (const auto& row : report.rows) {
        os << (row.passed() ? "PASS " : "FAIL ") << row.suite << "  [" << row.anchor << "]\n";
        for (const auto& c : row.checks) {
            os << "    " << (c.passed() ? "ok  " : "BAD ") << c.label << " = "
               << std::setprecision(6) << c.value << ' ' << to_string(c.relation) << ' '
               << c.threshold << '\n';
        }
    }
    os << "overall: " << (report.passed() ? "PASS" : "FAIL") << " (" << report.rows.size()
       << " rows)\n";
    return os.str();
}

nlohmann::json render_json(const SuiteReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& c : row.checks) {
            checks.push_back({{"label", c.label},
                              {"value", c.value},
                              {"threshold", c.threshold},
                              {"relation", std::string(to_string(c.relation))},
                              {"passed", c.passed()}});
        }
        const SubCheck* head = row.checks.empty() ? nullptr : &row.checks.front();
        rows.push_back({{"suite", row.suite},
                        {"anchor", row.anchor},
                        {"seed", row.seed},
                        {"statistic", head ? head->value : 0.0},
                        {"threshold", head ? head->threshold : 0.0},
                        {"passed", row.passed()},
                        {"checks", checks}});
    }
    return {{"version", kVersion},
            {"seed", report.seed},
            {"assumption_margin", report.assumption_margin},
            {"warnings", report.warnings},
            {"passed", report.passed()},
            {"rows", rows}};
}

}  // namespace chainbsde
