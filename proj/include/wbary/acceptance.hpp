#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace wbary {

struct AcceptanceOptions {
    bool reduced = false;  // smaller grids and sample counts
    bool p2_only = false;  // only the p = 2 parts
    std::uint64_t seed = 7;
};

enum class CriterionStatus { pass, fail, known_failure, skipped };
std::string to_string(CriterionStatus s);

struct CriterionResult {
    int id = 0;
    std::string title;
    CriterionStatus status = CriterionStatus::skipped;
    std::string detail;
    double seconds = 0.0;
};

// Runs every criterion, printing one line per criterion to `os` as it completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream& os);

// 0 when no criterion has status fail.
int acceptance_exit_code(const std::vector<CriterionResult>& results);

}  // namespace wbary
