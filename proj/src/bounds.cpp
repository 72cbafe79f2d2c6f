#include "wbary/bounds.hpp"

#include "wbary/error.hpp"
#include "wbary/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>

namespace wbary {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TupleScan {
    double D = kInf, m = kInf;
};

TupleScan scan_tuples(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                      const MmotOptions& opts) {
    if (measures.size() < 2) throw ValidationError("marginals", "need at least 2 marginals");
    for (std::size_t i = 0; i < measures.size(); ++i) measures[i].validate("marginals[" + std::to_string(i) + "]");
    check_weights(weights, measures.size());
    const std::size_t total = product_size(measures);
    if (total > opts.cap)
        throw SizeError("support product has " + std::to_string(total) + " tuples, above the cap of " +
                        std::to_string(opts.cap) + "; subsample the supports or raise --cap");
    const std::size_t n = measures.size();
    std::vector<int> shape;
    for (std::size_t i = 1; i < n; ++i) shape.push_back(measures[i].size());
    std::size_t reduced = total / measures[0].size();
    std::vector<double> rw(weights.begin() + 1, weights.end());
    double rs = 0.0;
    for (double w : rw) rs += w;
    for (double& w : rw) w /= rs;
    std::vector<double> dmin(reduced, kInf), mmin(reduced, kInf);
    parallel_for(reduced, [&](std::size_t r) {
        std::vector<Vec> tuple(n);
        std::size_t rem = r;
        for (int k = static_cast<int>(shape.size()) - 1; k >= 0; --k) {
            tuple[k + 1] = measures[k + 1].atoms[rem % shape[k]];
            rem /= shape[k];
        }
        Vec zr;
        if (n == 2) {
            zr = tuple[1];
        } else {
            WeightedPointConfig red{std::vector<Vec>(tuple.begin() + 1, tuple.end()), rw, p};
            zr = pbary_solve(red, opts.solver).z;
        }
        for (const auto& x1 : measures[0].atoms) {
            tuple[0] = x1;
            WeightedPointConfig cfg{tuple, weights, p};
            Vec z = pbary_solve(cfg, opts.solver).z;
            dmin[r] = std::min(dmin[r], (z - zr).norm());
            for (const auto& x : tuple) mmin[r] = std::min(mmin[r], (x - z).norm());
        }
    });
    TupleScan s;
    for (std::size_t r = 0; r < reduced; ++r) {
        s.D = std::min(s.D, dmin[r]);
        s.m = std::min(s.m, mmin[r]);
    }
    return s;
}

std::string class_label(const std::vector<int>& S) {
    std::string s;
    for (int i : S) s += (s.empty() ? "" : "+") + std::to_string(i + 1);
    return s;
}

bool contains(const std::vector<int>& S, int i) { return std::find(S.begin(), S.end(), i) != S.end(); }

// max_{i not in S} |H_i| / min_{i not in S} Lambda_i at the barycenter of cfg.
double curvature_ratio(const WeightedPointConfig& cfg, const Vec& z, const std::vector<int>& S, double eps,
                       bool* near_singular) {
    CurvatureBlocks cb;
    try {
        cb = curvature_blocks(cfg, z, eps);
    } catch (const DegenerateError&) {
        *near_singular = true;
        return kInf;
    }
    double hmax = 0.0, lmin = kInf;
    for (int i = 0; i < cfg.size(); ++i) {
        if (contains(S, i)) continue;
        hmax = std::max(hmax, cb.singular[i] ? kInf : max_sym_eigenvalue(cb.H[i]));
        lmin = std::min(lmin, cb.Lambda[i]);
    }
    if (!(lmin > 1e-14 * hmax)) *near_singular = true;
    if (!(lmin > 0.0)) return kInf;
    return hmax / lmin;
}

}  // namespace

double compute_D(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                 const MmotOptions& opts) {
    return scan_tuples(measures, weights, p, opts).D;
}

double compute_m(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                 const MmotOptions& opts) {
    return scan_tuples(measures, weights, p, opts).m;
}

double enclosing_diameter(const std::vector<DiscreteMeasure>& measures) {
    double r = 0.0;
    for (const auto& mu : measures)
        for (const auto& x : mu.atoms) r = std::max(r, x.norm());
    return 2.0 * r;
}

SupportGeometry support_geometry(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights,
                                 double p, const MmotOptions& opts) {
    auto s = scan_tuples(measures, weights, p, opts);
    return {s.D, s.m, enclosing_diameter(measures)};
}

double integrability_bound(double f1_lq, const SupportGeometry& geometry, double q, double p, double lambda1, int d,
                           double C) {
    if (!(q > 1.0)) throw ValidationError("q", "integrability bound needs q > 1");
    if (!(p > 1.0)) throw ValidationError("p", "exponent must satisfy p > 1");
    if (!(lambda1 > 0.0 && lambda1 <= 1.0)) throw ValidationError("weights[0]", "lambda_1 must lie in (0, 1]");
    if (d < 1) throw ValidationError("d", "dimension must be at least 1");
    if (!(f1_lq >= 0.0)) throw ValidationError("f1", "L^q norm must be nonnegative");
    double g = 1.0;
    if (!is_p_two(p)) {
        g = p > 2.0 ? geometry.D : geometry.m;
        if (!(g > 0.0))
            throw DegenerateError(std::string(p > 2.0 ? "D" : "m") + " vanishes; the distant-support bound is undefined");
        g = std::pow(g, d * std::abs(p - 2.0));
    }
    double denom = std::pow(lambda1, d * (1.0 - alpha_p(p))) * g;
    return C * f1_lq / std::pow(denom, (q - 1.0) / q);
}

GeneralLqReport general_lq_bound(const GridDensity& f1, const std::vector<PointMap>& maps,
                                 const std::vector<double>& weights, double p, double q, const GeneralLqOptions& opts) {
    f1.validate("f1");
    if (!(q > 1.0)) throw ValidationError("q", "general L^q bound needs q > 1");
    if (opts.levels < 1) throw ValidationError("levels", "need at least one level");
    check_weights(weights, maps.size() + 1);
    const int d = f1.dim();
    const std::size_t cells = f1.num_cells();
    const double vol = f1.cell_volume();
    const double expo = d * (q - 1.0);
    const int L = opts.levels;

    std::vector<std::vector<double>> diag(L, std::vector<double>(cells, 0.0)), rat(L, std::vector<double>(cells, 0.0));
    std::vector<char> in_f1(cells, 0), near(cells, 0);
    std::vector<LqCell> kept(opts.keep_cells ? cells : 0);

    parallel_for(cells, [&](std::size_t c) {
        double f = f1.values[c];
        if (f == 0.0 && !opts.keep_cells) return;
        auto mi = f1.unflatten(c);
        for (int l = 0; l < L; ++l) {
            const int s = 1 << l;
            int total = 1;
            for (int k = 0; k < d; ++k) total *= s;
            double dsum = 0.0, rsum = 0.0;
            std::vector<int> sub(d, 0);
            for (int t = 0; t < total; ++t) {
                int rem = t;
                for (int k = d - 1; k >= 0; --k) {
                    sub[k] = rem % s;
                    rem /= s;
                }
                Vec x(d);
                for (int k = 0; k < d; ++k) x(k) = f1.lo(k) + (mi[k] + (sub[k] + 0.5) / s) * f1.cell_width(k);
                std::vector<Vec> tuple{x};
                for (const auto& T : maps) tuple.push_back(T(x));
                WeightedPointConfig cfg{tuple, weights, p};
                Vec z = pbary_solve(cfg, opts.solver).z;
                auto S = coincident_indices(cfg, z, opts.eps_S);
                double ratio = 0.0;
                if (contains(S, 0)) {
                    dsum += 1.0;
                    if (l == 0) in_f1[c] = 1;
                } else {
                    bool ns = false;
                    ratio = curvature_ratio(cfg, z, S, opts.eps_S, &ns);
                    if (ns) near[c] = 1;
                    rsum += std::pow(ratio, expo);
                }
                if (l == 0 && opts.keep_cells) kept[c] = {x, class_label(S), ratio, f};
            }
            double fq = std::pow(f, q) * vol;
            diag[l][c] = fq * dsum / total;
            rat[l][c] = f == 0.0 ? 0.0 : fq * rsum / total;
        }
    });

    GeneralLqReport rep;
    const double pref = std::pow(2.0, expo);
    for (int l = 0; l < L; ++l) {
        double ds = 0.0, rs = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            ds += diag[l][c];
            rs += rat[l][c];
        }
        rep.level_sums.push_back(ds + pref * rs);
        if (l == L - 1) {
            rep.diagonal_part = ds;
            rep.ratio_part = rs;
        }
    }
    for (std::size_t c = 0; c < cells; ++c) {
        if (f1.values[c] == 0.0) continue;
        rep.near_singular += near[c];
        (in_f1[c] ? rep.cells_in_F1 : rep.cells_other) += 1;
    }
    rep.value = rep.level_sums.back();
    rep.value_half_prefactor = rep.diagonal_part + 0.5 * rep.ratio_part;
    if (!std::isfinite(rep.value)) {
        rep.diverging = true;
    } else if (L >= 3) {
        double inc1 = rep.level_sums[L - 2] - rep.level_sums[L - 3];
        double inc2 = rep.level_sums[L - 1] - rep.level_sums[L - 2];
        rep.diverging = inc1 > 1e-6 * rep.level_sums[L - 3] && inc2 >= opts.divergence_ratio * inc1;
    }
    if (opts.keep_cells) rep.cells = std::move(kept);
    return rep;
}

GeneralLqReport general_lq_bound(const GridDensity& f1, const std::vector<Vec>& anchors,
                                 const std::vector<double>& weights, double p, double q, const GeneralLqOptions& opts) {
    std::vector<PointMap> maps;
    for (const auto& a : anchors) maps.push_back([a](const Vec&) { return a; });
    return general_lq_bound(f1, maps, weights, p, q, opts);
}

void write_cells_csv(const GeneralLqReport& report, std::ostream& os) {
    if (report.cells.empty()) return;
    const int d = static_cast<int>(report.cells.front().x.size());
    for (int k = 0; k < d; ++k) os << "x" << k << ",";
    os << "S,ratio,f\n" << std::setprecision(17);
    for (const auto& c : report.cells) {
        for (int k = 0; k < d; ++k) os << c.x(k) << ",";
        os << c.S << "," << c.ratio << "," << c.f << "\n";
    }
}

InjectivityReport local_injectivity_check(const TransportPlan& plan, std::size_t base, const InjectivityOptions& opts) {
    InjectivityReport rep;
    if (base >= plan.entries.size()) throw ValidationError("base", "index outside the plan support");
    const std::size_t n = plan.marginals.size();
    const std::size_t s = plan.entries.size();
    auto flat = [&](std::size_t e) {
        auto t = plan.tuple(plan.entries[e].index);
        Vec v(static_cast<int>(n * t[0].size()));
        for (std::size_t i = 0; i < n; ++i) v.segment(i * t[0].size(), t[0].size()) = t[i];
        return v;
    };
    std::vector<Vec> flats(s);
    std::vector<std::vector<int>> classes(s);
    std::vector<Vec> bary(s);
    for (std::size_t e = 0; e < s; ++e) {
        flats[e] = flat(e);
        WeightedPointConfig cfg{plan.tuple(plan.entries[e].index), plan.weights, plan.p};
        bary[e] = pbary_solve(cfg).z;
        classes[e] = coincident_indices(cfg, bary[e], opts.eps_S);
    }
    const auto& S = classes[base];
    rep.S = class_label(S);
    if (S.size() == n) return rep;
    WeightedPointConfig cfg{plan.tuple(plan.entries[base].index), plan.weights, plan.p};
    bool ns = false;
    double ratio = curvature_ratio(cfg, bary[base], S, opts.eps_S, &ns);
    rep.constant = std::isfinite(ratio) ? 0.5 / ratio : 0.0;

    std::vector<std::size_t> cand;
    double diam = 0.0;
    for (std::size_t e = 0; e < s; ++e)
        for (std::size_t f = e + 1; f < s; ++f) diam = std::max(diam, (flats[e] - flats[f]).norm());
    for (std::size_t e = 0; e < s; ++e)
        if (classes[e] == S) cand.push_back(e);
    rep.candidates = cand.size();
    if (diam == 0.0) return rep;

    const int dd = static_cast<int>(flats[0].size() / n);
    std::mt19937_64 rng(opts.seed);
    for (int k = 0; k <= opts.k_max; ++k) {
        double r = std::ldexp(diam, -k);
        std::vector<std::size_t> inside;
        for (std::size_t e : cand)
            if ((flats[e] - flats[base]).norm() <= r) inside.push_back(e);
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < inside.size(); ++a)
            for (std::size_t b = a + 1; b < inside.size(); ++b) pairs.emplace_back(inside[a], inside[b]);
        if (pairs.size() > opts.sample_pairs) {
            std::shuffle(pairs.begin(), pairs.end(), rng);
            pairs.resize(opts.sample_pairs);
        }
        std::size_t violations = 0;
        double worst = kInf;
        for (auto [a, b] : pairs) {
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (contains(S, static_cast<int>(i))) continue;
                sq += (flats[a].segment(i * dd, dd) - flats[b].segment(i * dd, dd)).squaredNorm();
            }
            double margin = (bary[a] - bary[b]).norm() - rep.constant * std::sqrt(sq);
            worst = std::min(worst, margin);
            if (margin < -opts.slack) ++violations;
        }
        if (violations == 0) {
            rep.k0 = k;
            rep.radius = r;
            rep.pairs_at_k0 = pairs.size();
            rep.vacuous = pairs.empty();
            rep.worst_margin = pairs.empty() ? 0.0 : worst;
            return rep;
        }
        rep.violations_at_k0_minus_1 = violations;
    }
    rep.pass = false;
    rep.k0 = opts.k_max + 1;
    return rep;
}

}  // namespace wbary
