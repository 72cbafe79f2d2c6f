#include "support.hpp"
#include "wbary/error.hpp"
#include "wbary/io.hpp"
#include "wbary/problem.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wbary;
using testsupport::vec;

namespace {

ProblemFile parse(const std::string& text) { return parse_problem(JsonDocument::parse(text, "test")); }

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

std::string field_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "";
}

const char* kMmot = R"({
  "kind": "mmot",
  "p": 3,
  "weights": [0.2, 0.3, 0.5],
  "marginals": [
    {"atoms": [[0, 0]]},
    {"atoms": [[1, 0]]},
    {"atoms": [[0, 2]]}
  ]
})";

}  // namespace

TEST_CASE("json syntax errors report the line") {
    const std::string msg = error_of("{\n  \"kind\": \"mmot\",\n  \"p\": ,\n}");
    CHECK(msg.find("line 3") != std::string::npos);
}

TEST_CASE("line_of tracks nested paths") {
    JsonDocument doc = JsonDocument::parse(kMmot, "test");
    CHECK(doc.line_of("kind") == 2);
    CHECK(doc.line_of("weights") == 4);
    CHECK(doc.line_of("marginals[1]") == 7);
    CHECK(doc.line_of("marginals[2].atoms") == 8);
}

TEST_CASE("weights summing to 0.9 name the field") {
    const std::string text = R"({"kind": "mmot", "p": 2, "weights": [0.3, 0.3, 0.3],
        "marginals": [{"atoms": [[0]]}, {"atoms": [[1]]}, {"atoms": [[2]]}]})";
    CHECK(field_of(text) == "weights");
    CHECK(error_of(text).find("sum") != std::string::npos);
}

TEST_CASE("field errors name the path and line") {
    std::string text = kMmot;
    text.replace(text.find("[0, 2]"), 6, "[0, 2, 1]");
    CHECK(field_of(text).rfind("marginals[2]", 0) == 0);
    CHECK(error_of(text).find("line 8") != std::string::npos);

    CHECK(field_of(R"({"kind": "mmot", "p": 2, "weights": [1], "marginals": [{"atoms": [[0]]}], "extra": 1})") ==
          "extra");
    CHECK(field_of(R"({"kind": "nope", "p": 2})") == "kind");
    CHECK(field_of(R"({"kind": "mmot", "p": 1, "weights": [1], "marginals": [{"atoms": [[0]]}]})") == "p");
    CHECK(field_of(R"({"kind": "mmot", "weights": [1], "marginals": [{"atoms": [[0]]}]})") == "p");
    CHECK(field_of(R"({"kind": "mmot", "p": 2, "weights": [1.5, -0.5],
        "marginals": [{"atoms": [[0]]}, {"atoms": [[1]]}]})")
              .rfind("weights", 0) == 0);
    CHECK(field_of(R"({"kind": "mmot", "p": 2, "weights": [1], "marginals": [{"atoms": [[0]], "masses": [-1]}]})")
              .rfind("marginals[0]", 0) == 0);
}

TEST_CASE("semidiscrete problems need a density and single atoms") {
    const std::string ok = R"({"kind": "semidiscrete", "p": 3, "weights": [0.5, 0.5],
        "marginals": [{"type": "uniform_ball", "center": [0, 0]}, {"dirac": [1, 0]}]})";
    ProblemFile pf = parse(ok);
    CHECK(pf.kind == ProblemKind::semidiscrete);
    CHECK(pf.marginals[0].type == MarginalType::uniform_ball);
    CHECK(pf.marginals[0].radius == doctest::Approx(1.0 / std::sqrt(M_PI)));
    CHECK(pf.dim() == 2);

    const std::string bad = R"({"kind": "semidiscrete", "p": 3, "weights": [0.5, 0.5],
        "marginals": [{"type": "uniform_ball", "center": [0, 0]}, {"atoms": [[1, 0], [2, 0]]}]})";
    CHECK(field_of(bad).rfind("marginals[1]", 0) == 0);
}

TEST_CASE("uniform ball density is normalized by cell-center inclusion") {
    ProblemFile pf = parse(R"({"kind": "semidiscrete", "p": 3, "weights": [0.5, 0.5],
        "marginals": [{"type": "uniform_ball", "center": [1, 2], "radius": 0.5}, {"dirac": [1, 0]}]})");
    GridDensity g = pf.marginals[0].density(32);
    CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
    DiscreteMeasure m = pf.marginals[0].measure(32);
    double total = 0.0;
    for (std::size_t j = 0; j < m.atoms.size(); ++j) {
        CHECK((m.atoms[j] - vec({1.0, 2.0})).norm() <= 0.5);
        total += m.masses[j];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("overrides are validated") {
    ProblemFile pf = parse(kMmot);
    Overrides o;
    o.p = 1.5;
    o.grid = 64;
    apply_overrides(pf, o);
    CHECK(pf.p == 1.5);
    CHECK(pf.grid == 64);
    Overrides bad;
    bad.q = std::vector<double>{0.5};
    CHECK_THROWS_AS(apply_overrides(pf, bad), ValidationError);
    Overrides bad_tol;
    bad_tol.tol = 0.5;
    CHECK_THROWS_AS(apply_overrides(pf, bad_tol), ValidationError);
}

TEST_CASE("single-atom mmot objective equals the cost of the tuple") {
    ProblemFile pf = parse(kMmot);
    RunArtifacts a = execute(pf);
    const double expected = cp_cost({vec({0.0, 0.0}), vec({1.0, 0.0}), vec({0.0, 2.0})}, {0.2, 0.3, 0.5}, 3.0);
    CHECK(a.summary["objective"].get<double>() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(a.summary["support_size"].get<int>() == 1);
    Json m = manifest(pf, a);
    CHECK(m["tool"] == "wbary");
    CHECK(m["seed"] == 1);
    CHECK(m["files"].size() == a.files.size() + 2);  // plus summary.json and manifest.json
}

TEST_CASE("point barycenter at p=2 is the weighted mean") {
    ProblemFile pf = parse(R"({"kind": "point_bary", "p": 2, "weights": [0.25, 0.75], "points": [[0, 0], [4, 8]]})");
    Json s = execute(pf).summary;
    CHECK(s["z"][0].get<double>() == doctest::Approx(3.0));
    CHECK(s["z"][1].get<double>() == doctest::Approx(6.0));
}

TEST_CASE("affine problem with mixed structure is a structure error") {
    ProblemFile pf = parse(R"({"kind": "affine", "p": 3, "weights": [0.5, 0.5],
        "mu": {"atoms": [[0, 0], [1, 1]]},
        "maps": [{"A": [[1, 0], [0, 2]], "v": [0, 0]}, {"A": [[1, 0], [0, 1]], "v": [1, 0]}]})");
    CHECK_THROWS_AS(execute(pf), StructureError);
}

TEST_CASE("run_problem_file exit codes and artifacts") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "wbary_test_io";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    };
    std::ostringstream err;
    CHECK(run_problem_file(write("ok.json", kMmot), {}, (dir / "ok").string(), err) == exit_ok);
    CHECK(fs::exists(dir / "ok" / "summary.json"));
    CHECK(fs::exists(dir / "ok" / "manifest.json"));
    CHECK(fs::exists(dir / "ok" / "plan.csv"));

    const std::string bad = R"({"kind": "mmot", "p": 2, "weights": [0.3, 0.3, 0.3],
        "marginals": [{"atoms": [[0]]}, {"atoms": [[1]]}, {"atoms": [[2]]}]})";
    CHECK(run_problem_file(write("bad.json", bad), {}, (dir / "bad").string(), err) == exit_validation);
    CHECK(err.str().find("weights") != std::string::npos);

    CHECK(run_problem_file((dir / "missing.json").string(), {}, (dir / "m").string(), err) == exit_validation);

    // the first marginal never reaches the singular point
    const std::string degenerate = R"({"kind": "counterexample", "p": 3, "weights": [0.5, 0.5],
        "marginals": [{"type": "uniform_ball", "center": [10, 0]}, {"dirac": [0, 0]}]})";
    CHECK(run_problem_file(write("deg.json", degenerate), {}, (dir / "deg").string(), err) == exit_numerical);
    fs::remove_all(dir);
}
