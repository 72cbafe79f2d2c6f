#include "wbary/io.hpp"

#include "wbary/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace wbary {

namespace {

// Records the line of every value; the text is already known to be valid JSON.
class LineScanner {
public:
    LineScanner(const std::string& text, std::map<std::string, int>& lines) : s_(text), lines_(lines) {}

    void run() { value(""); }

private:
    const std::string& s_;
    std::map<std::string, int>& lines_;
    std::size_t i_ = 0;
    int line_ = 1;

    void ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
            if (s_[i_] == '\n') ++line_;
            ++i_;
        }
    }

    std::string string() {
        std::string out;
        ++i_;
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\') ++i_;
            out += s_[i_++];
        }
        ++i_;
        return out;
    }

    void value(const std::string& path) {
        ws();
        lines_.emplace(path, line_);
        if (i_ >= s_.size()) return;
        const char c = s_[i_];
        if (c == '{') {
            ++i_;
            ws();
            while (i_ < s_.size() && s_[i_] != '}') {
                ws();
                std::string key = string();
                ws();
                ++i_;  // ':'
                value(path.empty() ? key : path + "." + key);
                ws();
                if (s_[i_] == ',') ++i_;
                ws();
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            ws();
            for (int k = 0; i_ < s_.size() && s_[i_] != ']'; ++k) {
                value(path + "[" + std::to_string(k) + "]");
                ws();
                if (s_[i_] == ',') ++i_;
                ws();
            }
            ++i_;
        } else if (c == '"') {
            string();
        } else {
            while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != ']' && s_[i_] != '}' &&
                   !std::isspace(static_cast<unsigned char>(s_[i_])))
                ++i_;
        }
    }
};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string at(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

double read_number(const JsonDocument& doc, const Json& j, const std::string& path) {
    if (!j.is_number()) doc.fail(path, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) doc.fail(path, "must be finite");
    return x;
}

long long read_integer(const JsonDocument& doc, const Json& j, const std::string& path) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) doc.fail(path, "expected an integer");
    return j.get<long long>();
}

std::vector<double> read_numbers(const JsonDocument& doc, const Json& j, const std::string& path) {
    if (!j.is_array()) doc.fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(read_number(doc, j[k], at(path, k)));
    return out;
}

Vec read_vec(const JsonDocument& doc, const Json& j, const std::string& path) {
    auto xs = read_numbers(doc, j, path);
    if (xs.empty()) doc.fail(path, "must not be empty");
    return Eigen::Map<Vec>(xs.data(), static_cast<int>(xs.size()));
}

std::vector<Vec> read_points(const JsonDocument& doc, const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) doc.fail(path, "expected a non-empty array of points");
    std::vector<Vec> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(read_vec(doc, j[k], at(path, k)));
        if (out.back().size() != out.front().size()) doc.fail(at(path, k), "dimension mismatch");
    }
    return out;
}

Mat read_matrix(const JsonDocument& doc, const Json& j, const std::string& path) {
    auto rows = read_points(doc, j, path);
    Mat m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) m.row(r) = rows[r].transpose();
    return m;
}

const Json& require(const JsonDocument& doc, const Json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) doc.fail(path.empty() ? key : join(path, key), "missing required field");
    return obj.at(key);
}

void check_keys(const JsonDocument& doc, const Json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) doc.fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) doc.fail(join(path, it.key()), "unknown field");
}

// Re-raises a ValidationError from a library call with the line of its field.
template <class F>
auto located(const JsonDocument& doc, const std::string& prefix, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        std::string what = e.what();
        const std::string head = e.field() + ": ";
        if (what.rfind(head, 0) == 0) what = what.substr(head.size());
        std::string field = e.field();
        if (field.rfind(prefix, 0) != 0) field = prefix;
        doc.fail(field, what);
    }
}

MarginalSpec read_marginal(const JsonDocument& doc, const Json& j, const std::string& path) {
    if (!j.is_object()) doc.fail(path, "expected an object");
    MarginalSpec m;
    const std::string type = j.contains("type") ? (j["type"].is_string() ? j["type"].get<std::string>() : "") : "discrete";
    if (type == "uniform_ball") {
        check_keys(doc, j, path, {"type", "center", "radius", "lo", "hi"});
        m.type = MarginalType::uniform_ball;
        m.center = read_vec(doc, require(doc, j, path, "center"), join(path, "center"));
        const int d = static_cast<int>(m.center.size());
        m.radius = j.contains("radius") ? read_number(doc, j["radius"], join(path, "radius")) : unit_volume_ball_radius(d);
        if (!(m.radius > 0.0)) doc.fail(join(path, "radius"), "must be positive");
        m.lo = m.center - Vec::Constant(d, 1.25 * m.radius);
        m.hi = m.center + Vec::Constant(d, 1.25 * m.radius);
        if (j.contains("lo")) m.lo = read_vec(doc, j["lo"], join(path, "lo"));
        if (j.contains("hi")) m.hi = read_vec(doc, j["hi"], join(path, "hi"));
        if (m.lo.size() != d) doc.fail(join(path, "lo"), "dimension mismatch");
        if (m.hi.size() != d) doc.fail(join(path, "hi"), "dimension mismatch");
        for (int k = 0; k < d; ++k)
            if (!(m.hi(k) > m.lo(k))) doc.fail(join(path, "hi"), "must exceed lo in every coordinate");
        return m;
    }
    if (type != "discrete") doc.fail(join(path, "type"), "expected \"discrete\" or \"uniform_ball\"");
    check_keys(doc, j, path, {"type", "atoms", "masses", "dirac"});
    std::vector<Vec> atoms;
    std::vector<double> masses;
    if (j.contains("dirac")) {
        if (j.contains("atoms") || j.contains("masses")) doc.fail(join(path, "dirac"), "cannot be combined with atoms");
        atoms.push_back(read_vec(doc, j["dirac"], join(path, "dirac")));
        masses.push_back(1.0);
    } else {
        atoms = read_points(doc, require(doc, j, path, "atoms"), join(path, "atoms"));
        if (j.contains("masses")) {
            masses = read_numbers(doc, j["masses"], join(path, "masses"));
            if (masses.size() != atoms.size()) doc.fail(join(path, "masses"), "length differs from atoms");
        } else {
            masses.assign(atoms.size(), 1.0 / atoms.size());
        }
    }
    m.discrete = located(doc, path, [&] { return make_measure(atoms, masses, path); });
    return m;
}

std::vector<double> read_weights(const JsonDocument& doc, const Json& root, std::size_t n) {
    auto w = read_numbers(doc, require(doc, root, "", "weights"), "weights");
    if (w.size() != n) doc.fail("weights", "expected " + std::to_string(n) + " weights, got " + std::to_string(w.size()));
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!(w[k] > 0.0)) doc.fail(at("weights", k), "must be positive");
        s += w[k];
    }
    if (std::abs(s - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "must sum to 1 (sum = " << std::setprecision(17) << s << ")";
        doc.fail("weights", os.str());
    }
    return w;
}

void check_anchor_marginals(const JsonDocument& doc, const ProblemFile& pf, bool first_density_required) {
    if (pf.marginals.size() < 2) doc.fail("marginals", "at least two marginals are required");
    if (first_density_required && pf.marginals.front().type != MarginalType::uniform_ball)
        doc.fail("marginals[0]", "the first marginal must be a named density");
    if (pf.marginals.front().type != MarginalType::uniform_ball) return;
    for (std::size_t i = 1; i < pf.marginals.size(); ++i)
        if (pf.marginals[i].type != MarginalType::discrete || pf.marginals[i].discrete.size() != 1)
            doc.fail(at("marginals", i), "marginals after a density must be single atoms");
}

}  // namespace

JsonDocument JsonDocument::parse(const std::string& text, const std::string& source) {
    JsonDocument doc;
    doc.source_ = source;
    try {
        doc.root_ = Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw ValidationError("json", "syntax error at line " + std::to_string(line) + " of " + source);
    }
    LineScanner(text, doc.lines_).run();
    return doc;
}

JsonDocument JsonDocument::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("input", "cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str(), path);
}

int JsonDocument::line_of(const std::string& path) const {
    for (std::string p = path;;) {
        auto it = lines_.find(p);
        if (it != lines_.end()) return it->second;
        const auto cut = p.find_last_of(".[");
        if (cut == std::string::npos) return 0;
        p = p.substr(0, cut);
    }
}

void JsonDocument::fail(const std::string& path, const std::string& what) const {
    const int line = line_of(path);
    throw ValidationError(path, line > 0 ? what + " (" + source_ + " line " + std::to_string(line) + ")" : what);
}

GridDensity MarginalSpec::density(int res) const {
    if (type != MarginalType::uniform_ball) throw ValidationError("marginal", "not a named density");
    return uniform_ball_density(center, radius, lo, hi, std::vector<int>(center.size(), res));
}

DiscreteMeasure MarginalSpec::measure(int res) const {
    return type == MarginalType::discrete ? discrete : discretize(density(res));
}

std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::point_bary: return "point_bary";
        case ProblemKind::semidiscrete: return "semidiscrete";
        case ProblemKind::mmot: return "mmot";
        case ProblemKind::bounds: return "bounds";
        case ProblemKind::affine: return "affine";
        case ProblemKind::counterexample: return "counterexample";
    }
    return "unknown";
}

int ProblemFile::dim() const {
    if (!points.empty()) return static_cast<int>(points.front().size());
    if (!marginals.empty()) return marginals.front().dim();
    if (mu) return mu->dim();
    return 0;
}

void ProblemFile::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p", "must be finite and > 1");
    if (q.empty()) throw ValidationError("q", "at least one exponent is required");
    for (double x : q)
        if (!(x > 1.0) || !std::isfinite(x)) throw ValidationError("q", "every exponent must be finite and > 1");
    if (grid < 2 || grid > 8192) throw ValidationError("grid", "must lie in [2, 8192]");
    if (!(tol > 0.0) || !(tol < 1e-2)) throw ValidationError("tol", "must lie in (0, 1e-2)");
    if (cap < 1) throw ValidationError("cap", "must be positive");
    if ((kind == ProblemKind::counterexample) && std::abs(p - 2.0) < 1e-12)
        throw ValidationError("p", "the counterexample requires p != 2");
}

ProblemFile parse_problem(const JsonDocument& doc) {
    const Json& root = doc.root();
    check_keys(doc, root, "",
               {"kind", "description", "p", "q", "weights", "points", "marginals", "mu", "maps", "grid", "tol", "seed",
                "cap"});
    ProblemFile pf;
    const Json& kind = require(doc, root, "", "kind");
    const std::map<std::string, ProblemKind> kinds{{"point_bary", ProblemKind::point_bary},
                                                   {"semidiscrete", ProblemKind::semidiscrete},
                                                   {"mmot", ProblemKind::mmot},
                                                   {"bounds", ProblemKind::bounds},
                                                   {"affine", ProblemKind::affine},
                                                   {"counterexample", ProblemKind::counterexample}};
    if (!kind.is_string() || !kinds.count(kind.get<std::string>()))
        doc.fail("kind", "expected one of point_bary, semidiscrete, mmot, bounds, affine, counterexample");
    pf.kind = kinds.at(kind.get<std::string>());
    pf.p = read_number(doc, require(doc, root, "", "p"), "p");
    if (!(pf.p > 1.0)) doc.fail("p", "must be > 1");
    if (root.contains("q")) {
        pf.q = root["q"].is_array() ? read_numbers(doc, root["q"], "q") : std::vector<double>{read_number(doc, root["q"], "q")};
        if (pf.q.empty()) doc.fail("q", "must not be empty");
        for (std::size_t k = 0; k < pf.q.size(); ++k)
            if (!(pf.q[k] > 1.0)) doc.fail(root["q"].is_array() ? at("q", k) : "q", "must be > 1");
    }
    if (root.contains("grid")) {
        long long g = read_integer(doc, root["grid"], "grid");
        if (g < 2 || g > 8192) doc.fail("grid", "must lie in [2, 8192]");
        pf.grid = static_cast<int>(g);
    }
    if (root.contains("tol")) {
        pf.tol = read_number(doc, root["tol"], "tol");
        if (!(pf.tol > 0.0) || !(pf.tol < 1e-2)) doc.fail("tol", "must lie in (0, 1e-2)");
    }
    if (root.contains("seed")) {
        long long s = read_integer(doc, root["seed"], "seed");
        if (s < 0) doc.fail("seed", "must be non-negative");
        pf.seed = static_cast<std::uint64_t>(s);
    }
    if (root.contains("cap")) {
        long long c = read_integer(doc, root["cap"], "cap");
        if (c < 1) doc.fail("cap", "must be positive");
        pf.cap = static_cast<std::size_t>(c);
    }

    switch (pf.kind) {
        case ProblemKind::point_bary: {
            pf.points = read_points(doc, require(doc, root, "", "points"), "points");
            pf.weights = read_weights(doc, root, pf.points.size());
            break;
        }
        case ProblemKind::affine: {
            pf.mu = read_marginal(doc, require(doc, root, "", "mu"), "mu");
            const Json& maps = require(doc, root, "", "maps");
            if (!maps.is_array() || maps.empty()) doc.fail("maps", "expected a non-empty array");
            const int d = pf.mu->dim();
            for (std::size_t i = 0; i < maps.size(); ++i) {
                const std::string path = at("maps", i);
                check_keys(doc, maps[i], path, {"A", "v"});
                AffineMap m;
                m.A = read_matrix(doc, require(doc, maps[i], path, "A"), join(path, "A"));
                m.v = maps[i].contains("v") ? read_vec(doc, maps[i]["v"], join(path, "v")) : Vec::Zero(d);
                if (m.A.rows() != d || m.A.cols() != d) doc.fail(join(path, "A"), "must be " + std::to_string(d) + "x" + std::to_string(d));
                if (m.v.size() != d) doc.fail(join(path, "v"), "dimension mismatch");
                pf.maps.push_back(m);
            }
            pf.weights = read_weights(doc, root, pf.maps.size());
            break;
        }
        default: {
            const Json& ms = require(doc, root, "", "marginals");
            if (!ms.is_array() || ms.empty()) doc.fail("marginals", "expected a non-empty array");
            for (std::size_t i = 0; i < ms.size(); ++i) {
                pf.marginals.push_back(read_marginal(doc, ms[i], at("marginals", i)));
                if (pf.marginals.back().dim() != pf.marginals.front().dim()) doc.fail(at("marginals", i), "dimension mismatch");
            }
            pf.weights = read_weights(doc, root, pf.marginals.size());
            if (pf.kind == ProblemKind::semidiscrete || pf.kind == ProblemKind::counterexample)
                check_anchor_marginals(doc, pf, true);
            if (pf.kind == ProblemKind::bounds) check_anchor_marginals(doc, pf, false);
            break;
        }
    }
    if (pf.kind == ProblemKind::counterexample && std::abs(pf.p - 2.0) < 1e-12)
        doc.fail("p", "the counterexample requires p != 2");
    return pf;
}

ProblemFile load_problem(const std::string& path) { return parse_problem(JsonDocument::load(path)); }

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json to_json(const Vec& v) {
    Json a = Json::array();
    for (int k = 0; k < v.size(); ++k) a.push_back(number(v(k)));
    return a;
}

Json to_json(const Mat& m) {
    Json a = Json::array();
    for (int r = 0; r < m.rows(); ++r) a.push_back(to_json(Vec(m.row(r).transpose())));
    return a;
}

Json to_json(const AffineMap& m) { return {{"A", to_json(m.A)}, {"v", to_json(m.v)}}; }

Json to_json(const DiscreteMeasure& mu) {
    Json atoms = Json::array();
    for (const auto& x : mu.atoms) atoms.push_back(to_json(x));
    return {{"atoms", atoms}, {"masses", mu.masses}};
}

void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu) {
    const int d = mu.dim();
    for (int k = 0; k < d; ++k) os << "x" << k << ",";
    os << "mass\n";
    os << std::setprecision(17);
    for (int j = 0; j < mu.size(); ++j) {
        for (int k = 0; k < d; ++k) os << mu.atoms[j](k) << ",";
        os << mu.masses[j] << "\n";
    }
}

}  // namespace wbary
