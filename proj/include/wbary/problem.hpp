#pragma once

#include "wbary/io.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wbary {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { exit_ok = 0, exit_failure = 1, exit_validation = 2, exit_numerical = 3 };

struct Overrides {
    std::optional<double> p;
    std::optional<std::vector<double>> q;
    std::optional<int> grid;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cap;
};

void apply_overrides(ProblemFile& pf, const Overrides& o);

struct RunArtifacts {
    Json summary;
    // file name and content, written in this order
    std::vector<std::pair<std::string, std::string>> files;
};

// Runs the computation for one problem; throws the library errors.
RunArtifacts execute(const ProblemFile& pf);

Json manifest(const ProblemFile& pf, const RunArtifacts& a);

// Loads, runs and writes summary.json, the CSV files and manifest.json into out_dir.
// Returns an ExitCode; diagnostics go to err.
int run_problem_file(const std::string& path, const Overrides& o, const std::string& out_dir, std::ostream& err);

}  // namespace wbary
