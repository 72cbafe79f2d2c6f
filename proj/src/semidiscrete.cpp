#include "wbary/semidiscrete.hpp"

#include "wbary/error.hpp"
#include "wbary/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace wbary {

void DiracConfiguration::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p", "exponent must satisfy 1 < p < inf");
    if (weights.size() < 2) throw ValidationError("weights", "need at least 2 weights");
    if (anchors.size() + 1 != weights.size())
        throw ValidationError("anchors", "expected " + std::to_string(weights.size() - 1) + " anchors");
    const auto d = anchors.front().size();
    if (d < 1) throw ValidationError("anchors[0]", "dimension must be at least 1");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        if (anchors[i].size() != d) throw ValidationError("anchors[" + std::to_string(i) + "]", "dimension mismatch");
        if (!anchors[i].allFinite()) throw ValidationError("anchors[" + std::to_string(i) + "]", "non-finite coordinate");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw ValidationError("weights[" + std::to_string(i) + "]", "weights must be strictly positive");
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("weights", "weights must sum to 1 (got " + std::to_string(sum) + ")");
}

WeightedPointConfig DiracConfiguration::with_first(const Vec& x1) const {
    WeightedPointConfig c;
    c.p = p;
    c.weights = weights;
    c.points.reserve(weights.size());
    c.points.push_back(x1);
    for (const auto& a : anchors) c.points.push_back(a);
    return c;
}

std::string to_string(Singularity s) {
    switch (s) {
        case Singularity::none: return "none";
        case Singularity::fixed_point: return "fixed_point";
        case Singularity::anchor: return "anchor";
    }
    return "unknown";
}

SemidiscreteMap::SemidiscreteMap(DiracConfiguration cfg, SolverOptions opts) : cfg_(std::move(cfg)), opts_(opts) {
    cfg_.validate();
    alpha_ = alpha_p(cfg_.p);
    diam_ = diameter(cfg_.anchors);
    excl_ = 1e-12 * diam_;
    if (cfg_.anchors.size() == 1) {
        zbar_ = cfg_.anchors.front();
    } else {
        WeightedPointConfig red;
        red.p = cfg_.p;
        red.points = cfg_.anchors;
        double rest = 1.0 - cfg_.lambda1();
        for (std::size_t i = 1; i < cfg_.weights.size(); ++i) red.weights.push_back(cfg_.weights[i] / rest);
        double s = 0.0;
        for (double w : red.weights) s += w;
        for (double& w : red.weights) w /= s;
        zbar_ = pbary_solve(red, opts_).z;
    }
}

Vec SemidiscreteMap::gbar(const Vec& z) const {
    Vec g = Vec::Zero(z.size());
    for (std::size_t i = 0; i < cfg_.anchors.size(); ++i) {
        Vec w = cfg_.anchors[i] - z;
        double n = w.norm();
        if (n == 0.0) continue;
        g += cfg_.weights[i + 1] * std::pow(n, cfg_.p - 2.0) * w;
    }
    return g;
}

Mat SemidiscreteMap::grad_gbar(const Vec& z) const {
    const int d = static_cast<int>(z.size());
    const Mat id = Mat::Identity(d, d);
    Mat h = Mat::Zero(d, d);
    for (std::size_t i = 0; i < cfg_.anchors.size(); ++i) {
        Vec w = z - cfg_.anchors[i];
        double n = w.norm();
        if (n == 0.0) {
            if (cfg_.p < 2.0 && !is_p_two(cfg_.p)) throw DomainError("gradient of the reduced field is unbounded at an anchor");
            if (is_p_two(cfg_.p)) h += cfg_.weights[i + 1] * id;
            continue;
        }
        Vec u = w / n;
        h += cfg_.weights[i + 1] * std::pow(n, cfg_.p - 2.0) * ((cfg_.p - 2.0) * u * u.transpose() + id);
    }
    return -h;
}

Vec SemidiscreteMap::forward(const Vec& x1) const { return pbary_solve(cfg_.with_first(x1), opts_).z; }

Vec SemidiscreteMap::inverse(const Vec& z) const {
    Vec g = gbar(z);
    double n = g.norm();
    if (n == 0.0) return z;
    double lam = cfg_.lambda1();
    return z - std::pow(lam, -(1.0 - alpha_)) * g / std::pow(n, alpha_);
}

Singularity SemidiscreteMap::singularity_at(const Vec& z) const {
    if (is_p_two(cfg_.p)) return Singularity::none;
    if (cfg_.p > 2.0) {
        if ((z - zbar_).norm() <= excl_ || gbar(z).norm() == 0.0) return Singularity::fixed_point;
        return Singularity::none;
    }
    for (const auto& a : cfg_.anchors)
        if ((z - a).norm() <= excl_ || (z - a).norm() == 0.0) return Singularity::anchor;
    return Singularity::none;
}

std::vector<Vec> SemidiscreteMap::singular_points() const {
    if (is_p_two(cfg_.p)) return {};
    if (cfg_.p > 2.0) return {zbar_};
    return cfg_.anchors;
}

Mat SemidiscreteMap::grad_inverse(const Vec& z) const {
    const int d = static_cast<int>(z.size());
    const Mat id = Mat::Identity(d, d);
    const double lam = cfg_.lambda1();
    if (is_p_two(cfg_.p)) return id - grad_gbar(z) / lam;
    Singularity s = singularity_at(z);
    if (s != Singularity::none)
        throw DomainError("gradient of b^{-1} is singular at this point (" + to_string(s) + ")");
    Vec g = gbar(z);
    double n = g.norm();
    if (n == 0.0) return id;  // p < 2 at z̄: the correction term vanishes
    Vec u = g / n;
    Mat proj = id - alpha_ * u * u.transpose();
    return id - std::pow(lam, -(1.0 - alpha_)) * proj * grad_gbar(z) / std::pow(n, alpha_);
}

double SemidiscreteMap::jacobian_inverse(const Vec& z) const { return std::abs(grad_inverse(z).determinant()); }

double SemidiscreteMap::density(const DensityFn& f1, const Vec& z) const {
    double f = f1(inverse(z));
    if (f == 0.0) return 0.0;
    return f * jacobian_inverse(z);
}

Vec gbar(const DiracConfiguration& cfg, const Vec& z) { return SemidiscreteMap(cfg).gbar(z); }

Vec b_forward(const DiracConfiguration& cfg, const Vec& x1, double tol) {
    SolverOptions o;
    o.tol = tol;
    cfg.validate();
    return pbary_solve(cfg.with_first(x1), o).z;
}

Vec b_inverse(const DiracConfiguration& cfg, const Vec& z) { return SemidiscreteMap(cfg).inverse(z); }

Mat grad_b_inverse(const DiracConfiguration& cfg, const Vec& z) { return SemidiscreteMap(cfg).grad_inverse(z); }

Vec real_spectrum(const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, false);
    Vec ev = es.eigenvalues().real();
    std::sort(ev.data(), ev.data() + ev.size());
    return ev;
}

namespace {

double max_anchor_dist(const DiracConfiguration& c, const Vec& z) {
    double m = 0.0;
    for (const auto& a : c.anchors) m = std::max(m, (a - z).norm());
    return m;
}

double min_anchor_dist(const DiracConfiguration& c, const Vec& z) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : c.anchors) m = std::min(m, (a - z).norm());
    return m;
}

}  // namespace

BoundsReportGe2 check_bounds_p_ge2(const SemidiscreteMap& map, const Vec& z) {
    const auto& c = map.config();
    if (c.p < 2.0 && !is_p_two(c.p)) throw ValidationError("p", "bound check requires p >= 2");
    BoundsReportGe2 r;
    Vec ev = real_spectrum(map.grad_inverse(z));
    const double lam = c.lambda1(), a = map.alpha();
    r.min_eig = ev.minCoeff();
    r.max_eig = ev.maxCoeff();
    r.lower_margin = r.min_eig - 1.0;
    r.dist = (z - map.fixed_point()).norm();
    r.M = max_anchor_dist(c, z);
    r.upper_shape = std::pow((1.0 - lam) / lam, 1.0 - a) * std::pow(r.M / r.dist, c.p - 2.0);
    r.c_needed = (r.max_eig - 1.0) / r.upper_shape;
    double A = 0.0;
    for (std::size_t i = 0; i < c.anchors.size(); ++i) {
        double n = (c.anchors[i] - z).norm();
        if (n > 0.0) A += c.weights[i + 1] * std::pow(n, c.p - 2.0);
    }
    double gn = map.gbar(z).norm();
    double base = A / (std::pow(lam, 1.0 - a) * std::pow(gn, a));
    r.explicit_lower = 1.0 + (1.0 - a) * base;
    r.explicit_upper = 1.0 + (c.p - 1.0) * base;
    r.explicit_lower_margin = r.min_eig - r.explicit_lower;
    r.explicit_upper_margin = r.explicit_upper - r.max_eig;
    double scale = std::pow(lam, 1.0 - a) * std::pow(r.dist, a);
    r.scaled_min = scale * r.min_eig;
    r.scaled_max = scale * r.max_eig;
    return r;
}

BoundsReportLt2 check_bounds_p_lt2(const SemidiscreteMap& map, const Vec& z) {
    const auto& c = map.config();
    if (!(c.p < 2.0) || is_p_two(c.p)) throw ValidationError("p", "bound check requires 1 < p < 2");
    BoundsReportLt2 r;
    Mat g = map.grad_inverse(z);
    Vec ev = real_spectrum(g) - Vec::Ones(g.rows());
    const double lam = c.lambda1(), beta = -map.alpha();
    double lmin = *std::min_element(c.weights.begin() + 1, c.weights.end());
    r.min_eig = ev.minCoeff();
    r.max_eig = ev.maxCoeff();
    r.dist = (z - map.fixed_point()).norm();
    r.m = min_anchor_dist(c, z);
    r.M = max_anchor_dist(c, z);
    double common = std::pow(1.0 - lam, beta) * std::pow(lam, -(1.0 + beta));
    r.lower = (c.p - 1.0) * lmin * common * std::pow(r.dist / r.m, 2.0 - c.p);
    r.upper = (1.0 + beta) * common * std::pow(r.M / r.m, 2.0 - c.p);
    r.lower_margin = r.min_eig - r.lower;
    r.upper_margin = r.upper - r.max_eig;
    double At = 0.0;
    for (std::size_t i = 0; i < c.anchors.size(); ++i) At += c.weights[i + 1] * std::pow((c.anchors[i] - z).norm(), c.p - 2.0);
    double base = At * std::pow(map.gbar(z).norm(), beta) / std::pow(lam, 1.0 + beta);
    r.explicit_lower = (c.p - 1.0) * base;
    r.explicit_upper = (1.0 + beta) * base;
    r.explicit_lower_margin = r.min_eig - r.explicit_lower;
    r.explicit_upper_margin = r.explicit_upper - r.max_eig;
    return r;
}

namespace {

PushforwardResult pushforward_impl(const SemidiscreteMap& map, const DensityFn& f1, Vec lo, Vec hi, double source_mass,
                                   const PushforwardOptions& opts) {
    const int d = static_cast<int>(lo.size());
    if (static_cast<int>(opts.res.size()) != d) throw ValidationError("grid", "output resolution must have one entry per axis");
    for (int k = 0; k < d; ++k) {
        double w = hi(k) - lo(k);
        if (!(w > 0.0)) w = 1e-6;
        double pad = 2.0 * w / std::max(1, opts.res[k] - 4);
        lo(k) -= pad;
        hi(k) += pad;
    }
    PushforwardResult out;
    out.g = GridDensity(lo, hi, opts.res);
    out.source_mass = source_mass;
    const auto sing = map.singular_points();
    const double rad = opts.refine_cells * out.g.pitch();
    std::vector<char> refined(out.g.num_cells(), 0);
    auto safe_density = [&](const Vec& z) {
        try {
            return map.density(f1, z);
        } catch (const DomainError&) {
            return 0.0;
        }
    };
    parallel_for(out.g.num_cells(), [&](std::size_t i) {
        Vec z = out.g.center(i);
        bool near = false;
        for (const auto& s : sing)
            if ((z - s).norm() <= rad) near = true;
        if (!near) {
            out.g.values[i] = safe_density(z);
            return;
        }
        refined[i] = 1;
        const int s = std::max(1, opts.refine);
        std::size_t total = 1;
        for (int k = 0; k < d; ++k) total *= s;
        Vec corner = z;
        for (int k = 0; k < d; ++k) corner(k) -= 0.5 * out.g.cell_width(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < total; ++j) {
            std::size_t t = j;
            Vec y = corner;
            for (int k = d - 1; k >= 0; --k) {
                y(k) += (static_cast<double>(t % s) + 0.5) * out.g.cell_width(k) / s;
                t /= s;
            }
            acc += safe_density(y);
        }
        out.g.values[i] = acc / static_cast<double>(total);
    });
    for (char r : refined) out.refined_cells += r;
    out.mass = out.g.mass();
    out.mass_error = std::abs(out.mass - source_mass) / source_mass;
    out.coarse_warning = out.mass_error > opts.warn_mass_error;
    return out;
}

void extend_box(Vec& lo, Vec& hi, const Vec& z) {
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
}

}  // namespace

PushforwardResult pushforward_density(const SemidiscreteMap& map, const GridDensity& f1, const PushforwardOptions& opts) {
    f1.validate("f1");
    const int d = f1.dim();
    if (d != map.config().dim()) throw ValidationError("f1", "dimension does not match the anchors");
    Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    // The image of the support is bounded by the image of its boundary cells.
    std::size_t corners = std::size_t(1) << d;
    for (std::size_t i = 0; i < f1.num_cells(); ++i) {
        if (f1.values[i] <= 0.0) continue;
        auto m = f1.unflatten(i);
        bool boundary = false;
        for (int k = 0; k < d && !boundary; ++k) {
            for (int s : {-1, 1}) {
                auto nb = m;
                nb[k] += s;
                if (nb[k] < 0 || nb[k] >= f1.res[k] || f1.values[f1.flatten(nb)] <= 0.0) boundary = true;
            }
        }
        if (!boundary) continue;
        Vec c = f1.center(i);
        for (std::size_t b = 0; b < corners; ++b) {
            Vec x = c;
            for (int k = 0; k < d; ++k) x(k) += ((b >> k) & 1 ? 0.5 : -0.5) * f1.cell_width(k);
            extend_box(lo, hi, map.forward(x));
        }
    }
    if (!lo.allFinite()) throw ValidationError("f1", "density has empty support");
    DensityFn f = [&f1](const Vec& x) { return f1.value_at(x); };
    return pushforward_impl(map, f, lo, hi, f1.mass(), opts);
}

PushforwardResult pushforward_density(const SemidiscreteMap& map, const DensityFn& f1, const Vec& slo, const Vec& shi,
                                      const PushforwardOptions& opts) {
    const int d = static_cast<int>(slo.size());
    Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    // Sample the faces of the source box.
    const int n = d == 1 ? 1 : (d == 2 ? 256 : 32);
    for (int k = 0; k < d; ++k) {
        for (int side = 0; side < 2; ++side) {
            std::size_t total = 1;
            for (int j = 0; j < d - 1; ++j) total *= (n + 1);
            for (std::size_t t = 0; t < total; ++t) {
                Vec x(d);
                std::size_t u = t;
                for (int j = 0; j < d; ++j) {
                    if (j == k) {
                        x(j) = side ? shi(j) : slo(j);
                        continue;
                    }
                    x(j) = slo(j) + (shi(j) - slo(j)) * static_cast<double>(u % (n + 1)) / n;
                    u /= (n + 1);
                }
                extend_box(lo, hi, map.forward(x));
            }
        }
    }
    return pushforward_impl(map, f1, lo, hi, 1.0, opts);
}

double lq_norm(const GridDensity& g, double q) {
    if (!(q >= 1.0)) throw ValidationError("q", "q must be at least 1");
    return std::pow(g.lq_power(q), 1.0 / q);
}

LqEstimate lq_via_changevar(const SemidiscreteMap& map, const GridDensity& f1, double q, int levels) {
    if (!(q >= 1.0)) throw ValidationError("q", "q must be at least 1");
    f1.validate("f1");
    const int d = f1.dim();
    auto level_sum = [&](int s, std::size_t& skipped, bool& finite) {
        std::size_t sub = 1;
        for (int k = 0; k < d; ++k) sub *= s;
        std::vector<double> terms(f1.num_cells(), 0.0);
        std::vector<char> bad(f1.num_cells(), 0);
        parallel_for(f1.num_cells(), [&](std::size_t i) {
            double f = f1.values[i];
            if (f <= 0.0) return;
            Vec c = f1.center(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < sub; ++j) {
                Vec x = c;
                std::size_t t = j;
                for (int k = d - 1; k >= 0; --k) {
                    x(k) += ((static_cast<double>(t % s) + 0.5) / s - 0.5) * f1.cell_width(k);
                    t /= s;
                }
                double term;
                try {
                    double jac = map.jacobian_inverse(map.forward(x));
                    term = std::pow(f, q) * std::pow(jac, q - 1.0);
                } catch (const DomainError&) {
                    term = std::numeric_limits<double>::infinity();
                }
                if (!std::isfinite(term)) {
                    bad[i] = 1;
                    continue;
                }
                acc += term;
            }
            terms[i] = acc / static_cast<double>(sub);
        });
        double sum = 0.0;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            sum += terms[i];
            if (bad[i]) {
                ++skipped;
                finite = false;
            }
        }
        return sum * f1.cell_volume();
    };
    LqEstimate est;
    est.value = level_sum(1, est.skipped, est.finite);
    est.level_sums.push_back(est.value);
    int want = est.finite ? levels : std::max(levels, 3);
    for (int l = 1; l < want; ++l) {
        std::size_t sk = 0;
        bool fin = true;
        est.level_sums.push_back(level_sum(1 << l, sk, fin));
    }
    if (!est.finite) est.value = std::numeric_limits<double>::infinity();
    return est;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::integrable: return "integrable";
        case Verdict::not_integrable: return "not_integrable";
        case Verdict::indeterminate: return "indeterminate";
    }
    return "unknown";
}

std::vector<double> dyadic_radii(double r_max, int count) {
    std::vector<double> r;
    for (int k = 1; k <= count; ++k) r.push_back(r_max * std::pow(0.5, k));
    return r;
}

namespace {

std::vector<Vec> sphere_directions(int d) {
    std::vector<Vec> dirs;
    if (d == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
    } else if (d == 2) {
        for (int j = 0; j < 32; ++j) {
            double t = 2.0 * M_PI * (j + 0.5) / 32.0;
            Vec v(2);
            v << std::cos(t), std::sin(t);
            dirs.push_back(v);
        }
    } else {
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> g;
        for (int j = 0; j < 64; ++j) {
            Vec v(d);
            for (int k = 0; k < d; ++k) v(k) = g(rng);
            dirs.push_back(v.normalized());
        }
    }
    return dirs;
}

BlowupFit fit(int d, const std::vector<double>& radii, const std::vector<double>& means, const std::vector<double>& qs,
              double margin) {
    if (radii.size() < 4) throw InsufficientDataError("fewer than 4 usable annuli for the exponent fit");
    const double n = static_cast<double>(radii.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        double x = std::log(1.5 * radii[i]), y = std::log(means[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
    }
    BlowupFit f;
    f.radii = radii;
    f.means = means;
    double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    f.q0 = f.slope < 0.0 ? d / -f.slope : std::numeric_limits<double>::infinity();
    for (double q : qs) {
        Verdict v = Verdict::indeterminate;
        if (q < f.q0 * (1.0 - margin)) v = Verdict::integrable;
        else if (q > f.q0 * (1.0 + margin)) v = Verdict::not_integrable;
        f.verdicts.emplace_back(q, v);
    }
    return f;
}

}  // namespace

BlowupFit blowup_exponent(const SemidiscreteMap& map, const DensityFn& f1, const Vec& center,
                          const std::vector<double>& radii, const std::vector<double>& qs, double margin) {
    const int d = static_cast<int>(center.size());
    const auto dirs = sphere_directions(d);
    const int K = 4;
    std::vector<double> used_r, means;
    for (double r : radii) {
        double acc = 0.0;
        bool ok = true;
        int count = 0;
        for (int k = 0; k < K && ok; ++k) {
            double rr = r * (1.0 + (k + 0.5) / K);
            for (const auto& u : dirs) {
                double g;
                try {
                    g = map.density(f1, center + rr * u);
                } catch (const DomainError&) {
                    ok = false;
                    break;
                }
                if (!(g > 0.0) || !std::isfinite(g)) {
                    ok = false;
                    break;
                }
                acc += g;
                ++count;
            }
        }
        if (ok && count > 0) {
            used_r.push_back(r);
            means.push_back(acc / count);
        }
    }
    return fit(d, used_r, means, qs, margin);
}

BlowupFit blowup_exponent_grid(const GridDensity& g, const Vec& center, const std::vector<double>& radii,
                               const std::vector<double>& qs, double margin) {
    const int d = g.dim();
    std::vector<double> used_r, means;
    for (double r : radii) {
        double acc = 0.0;
        std::size_t count = 0;
        bool ok = true;
        for (std::size_t i = 0; i < g.num_cells(); ++i) {
            double dist = (g.center(i) - center).norm();
            if (dist < r || dist >= 2.0 * r) continue;
            if (!(g.values[i] > 0.0)) {
                ok = false;
                break;
            }
            acc += g.values[i];
            ++count;
        }
        if (ok && count > 0) {
            used_r.push_back(r);
            means.push_back(acc / static_cast<double>(count));
        }
    }
    return fit(d, used_r, means, qs, margin);
}

}  // namespace wbary
