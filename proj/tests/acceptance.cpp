// Acceptance run: one line per criterion on the shipped configuration.
#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "chainbsde/config.hpp"
#include "chainbsde/suites.hpp"

using namespace chainbsde;

namespace {

struct Criterion {
    int id;
    const char* suite;
    std::optional<double> seconds;  // runtime bound, if any
};

constexpr Criterion kCriteria[] = {
    {1, "seminorm", 1.0},
    {2, "pseudoinverse", 1.0},
    {3, "bsde-oracle", 1.0},
    {4, "isometry", 30.0},
    {5, "bracket", 30.0},
    {6, "stationary-obstacle", 60.0},
    {7, "monotonicity", std::nullopt},
    {8, "comparison", 120.0},
    {9, "estimate", 30.0},
    {10, "continuous-dependence", 120.0},
    {11, "skorokhod", std::nullopt},
};

double since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void print_checks(const ReportRow& row) {
    for (const auto& c : row.checks) {
        std::printf("      %s %s = %.6g %s %.6g\n", c.passed() ? "ok " : "BAD", c.label.c_str(),
                    c.value, std::string(to_string(c.relation)).c_str(), c.threshold);
    }
}

}  // namespace

int main() {
    const ExperimentConfig config = load_config(CHAINBSDE_DEFAULT_CONFIG);
    int failures = 0;

    for (const auto& c : kCriteria) {
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        std::string note;
        ReportRow row;
        try {
            row = run_one(c.suite, config);
            ok = row.passed();
        } catch (const std::exception& e) {
            note = e.what();
        }
        const double elapsed = since(start);
        const bool in_time = !c.seconds || elapsed < *c.seconds;
        const bool pass = ok && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %2d %-22s %s  (%.2f s%s)\n", c.id, c.suite, pass ? "PASS" : "FAIL",
                    elapsed, in_time ? "" : ", over time budget");
        if (!note.empty()) std::printf("      error: %s\n", note.c_str());
        if (!pass) print_checks(row);
    }

    // Criterion 12: the full suite twice, identical reports, within five minutes.
    {
        bool pass = false;
        double first_run = 0.0;
        std::string note;
        try {
            auto start = std::chrono::steady_clock::now();
            const SuiteReport a = run_suite(config, config.suites);
            first_run = since(start);
            const SuiteReport b = run_suite(config, config.suites);
            const bool same = render_text(a) == render_text(b) && render_json(a) == render_json(b);
            const bool complete = a.rows.size() == kSuiteNames.size();
            pass = same && complete && a.passed() && first_run <= 300.0;
            if (!same) note = "reports differ between runs";
            if (!complete) note = "suite selection does not cover every row";
            if (!a.passed()) note = "some rows fail";
        } catch (const std::exception& e) {
            note = e.what();
        }
        failures += pass ? 0 : 1;
        std::printf("criterion 12 %-22s %s  (%.2f s per run)\n", "full suite", pass ? "PASS" : "FAIL",
                    first_run);
        if (!note.empty()) std::printf("      %s\n", note.c_str());
    }

    std::printf("%s: %d of 12 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
