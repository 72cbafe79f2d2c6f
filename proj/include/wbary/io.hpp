#pragma once

#include "wbary/affine.hpp"
#include "wbary/grid.hpp"
#include "wbary/mmot.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wbary {

using Json = nlohmann::json;

// Parsed JSON text that remembers the source line of every value.
class JsonDocument {
public:
    // Throws ValidationError with the line of a syntax error.
    static JsonDocument parse(const std::string& text, const std::string& source = "input");
    static JsonDocument load(const std::string& path);

    const Json& root() const { return root_; }
    const std::string& source() const { return source_; }
    // Line of the value at a path such as "marginals[1].masses", 0 if unknown.
    int line_of(const std::string& path) const;
    // Throws ValidationError naming the field and its line.
    [[noreturn]] void fail(const std::string& path, const std::string& what) const;

private:
    Json root_;
    std::string source_;
    std::map<std::string, int> lines_;
};

enum class MarginalType { discrete, uniform_ball };

struct MarginalSpec {
    MarginalType type = MarginalType::discrete;
    DiscreteMeasure discrete;
    Vec center, lo, hi;
    double radius = 0.0;

    int dim() const { return type == MarginalType::discrete ? discrete.dim() : static_cast<int>(center.size()); }
    // Grid density of a named density with `res` cells per axis.
    GridDensity density(int res) const;
    // The discrete measure itself, or the grid cells of a named density.
    DiscreteMeasure measure(int res) const;
};

enum class ProblemKind { point_bary, semidiscrete, mmot, bounds, affine, counterexample };
std::string to_string(ProblemKind k);

struct ProblemFile {
    ProblemKind kind = ProblemKind::point_bary;
    double p = 2.0;
    std::vector<double> q{2.0};
    std::vector<double> weights;
    std::vector<Vec> points;               // point_bary
    std::vector<MarginalSpec> marginals;   // semidiscrete, mmot, bounds, counterexample
    std::optional<MarginalSpec> mu;        // affine
    std::vector<AffineMap> maps;           // affine
    int grid = 128;
    double tol = 1e-12;
    std::uint64_t seed = 1;
    std::size_t cap = 1'000'000;

    int dim() const;
    // Re-checks numeric constraints after command-line overrides.
    void validate() const;
};

ProblemFile parse_problem(const JsonDocument& doc);
ProblemFile load_problem(const std::string& path);

Json to_json(const Vec& v);
Json to_json(const Mat& m);
Json to_json(const AffineMap& m);
Json to_json(const DiscreteMeasure& mu);
// Non-finite values become null.
Json number(double x);

void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu);

}  // namespace wbary
