#include "wbary/barycenter.hpp"

#include "wbary/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wbary {

double alpha_p(double p) { return (p - 2.0) / (p - 1.0); }

bool is_p_two(double p) { return std::abs(p - 2.0) < 1e-9; }

double diameter(const std::vector<Vec>& points) {
    double d = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            d = std::max(d, (points[i] - points[j]).norm());
    return d;
}

void WeightedPointConfig::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p", "exponent must satisfy 1 < p < inf");
    if (points.size() < 2) throw ValidationError("points", "need at least 2 points");
    if (weights.size() != points.size())
        throw ValidationError("weights", "expected " + std::to_string(points.size()) + " weights, got " +
                                             std::to_string(weights.size()));
    const auto d = points.front().size();
    if (d < 1) throw ValidationError("points[0]", "dimension must be at least 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != d)
            throw ValidationError("points[" + std::to_string(i) + "]", "dimension mismatch");
        if (!points[i].allFinite()) throw ValidationError("points[" + std::to_string(i) + "]", "non-finite coordinate");
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw ValidationError("weights[" + std::to_string(i) + "]", "weights must be strictly positive");
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("weights", "weights must sum to 1 (got " + std::to_string(sum) + ")");
}

double pbary_objective(const WeightedPointConfig& cfg, const Vec& z) {
    double f = 0.0;
    for (int i = 0; i < cfg.size(); ++i) f += cfg.weights[i] * std::pow((cfg.points[i] - z).norm(), cfg.p);
    return f;
}

Vec el_residual(const WeightedPointConfig& cfg, const Vec& z) {
    Vec r = Vec::Zero(z.size());
    for (int i = 0; i < cfg.size(); ++i) {
        Vec w = cfg.points[i] - z;
        double n = w.norm();
        if (n == 0.0) continue;
        r += cfg.weights[i] * std::pow(n, cfg.p - 2.0) * w;
    }
    return r;
}

double residual_scale(const WeightedPointConfig& cfg) {
    double lmax = *std::max_element(cfg.weights.begin(), cfg.weights.end());
    return lmax * std::pow(diameter(cfg.points), cfg.p - 1.0);
}

std::vector<int> coincident_indices(const WeightedPointConfig& cfg, const Vec& z, double eps) {
    double thr = eps * diameter(cfg.points);
    std::vector<int> s;
    for (int i = 0; i < cfg.size(); ++i)
        if ((cfg.points[i] - z).norm() <= thr) s.push_back(i);
    return s;
}

namespace {

Mat hbar_at(const WeightedPointConfig& cfg, const Vec& z) {
    const int d = static_cast<int>(z.size());
    Mat h = Mat::Zero(d, d);
    for (int i = 0; i < cfg.size(); ++i) {
        Vec w = cfg.points[i] - z;
        double n = w.norm();
        if (n == 0.0) continue;
        Vec u = w / n;
        h += cfg.weights[i] * std::pow(n, cfg.p - 2.0) * ((cfg.p - 2.0) * u * u.transpose() + Mat::Identity(d, d));
    }
    return h;
}

void finish(const WeightedPointConfig& cfg, const SolverOptions& opts, BarycenterSolution& sol) {
    double diam = diameter(cfg.points);
    sol.residual_norm = el_residual(cfg, sol.z).norm();
    sol.coincident_set = coincident_indices(cfg, sol.z, opts.coincidence_eps);
    double thr = opts.coincidence_eps * diam;
    for (int i = 0; i < cfg.size(); ++i) {
        double r = (cfg.points[i] - sol.z).norm();
        if (r > thr / 10.0 && r < thr * 10.0) sol.borderline = true;
    }
}

}  // namespace

BarycenterSolution pbary_solve(const WeightedPointConfig& cfg, const SolverOptions& opts) {
    cfg.validate();
    if (!(opts.tol > 0.0)) throw ValidationError("tol", "tolerance must be positive");
    const int n = cfg.size();
    const int d = cfg.dim();
    const double p = cfg.p;
    const double diam = diameter(cfg.points);
    BarycenterSolution sol;

    if (diam == 0.0) {
        sol.z = cfg.points.front();
        finish(cfg, opts, sol);
        return sol;
    }
    if (is_p_two(p)) {
        sol.z = Vec::Zero(d);
        for (int i = 0; i < n; ++i) sol.z += cfg.weights[i] * cfg.points[i];
        finish(cfg, opts, sol);
        return sol;
    }
    if (n == 2) {
        double a = 1.0 / (p - 1.0);
        double w1 = std::pow(cfg.weights[0], a), w2 = std::pow(cfg.weights[1], a);
        sol.z = (w1 * cfg.points[0] + w2 * cfg.points[1]) / (w1 + w2);
        finish(cfg, opts, sol);
        return sol;
    }

    const double target = opts.tol * residual_scale(cfg);

    // A minimizer sitting exactly on an atom is common for p < 2 and cannot be
    // reached to tolerance by iterating from outside.
    for (int i = 0; i < n; ++i) {
        if (el_residual(cfg, cfg.points[i]).norm() <= target) {
            sol.z = cfg.points[i];
            finish(cfg, opts, sol);
            return sol;
        }
    }

    auto avoid_atoms = [&](Vec& z) {
        if (p >= 2.0) return;
        for (int i = 0; i < n; ++i)
            if ((cfg.points[i] - z).norm() == 0.0) z(0) += 1e-14 * diam;
    };

    Vec z = Vec::Zero(d);
    for (int i = 0; i < n; ++i) z += cfg.weights[i] * cfg.points[i];
    avoid_atoms(z);

    Vec best = z;
    double best_res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
        Vec r = el_residual(cfg, z);
        double rn = r.norm();
        if (rn < best_res) {
            best_res = rn;
            best = z;
        }
        if (rn <= target) {
            sol.z = z;
            sol.iterations = it;
            finish(cfg, opts, sol);
            return sol;
        }

        const double f0 = pbary_objective(cfg, z);
        Mat h = hbar_at(cfg, z);
        Eigen::LDLT<Mat> ldlt(h);
        Vec dir;
        bool newton = false;
        if (ldlt.info() == Eigen::Success) {
            Vec diag = ldlt.vectorD();
            if (diag.minCoeff() > 1e-14 * std::max(diag.maxCoeff(), 1e-300)) {
                dir = ldlt.solve(r);
                newton = dir.allFinite() && r.dot(dir) > 0.0;
            }
        }

        auto armijo = [&](const Vec& step, double t0, double t_min, Vec& out, double& fout) -> bool {
            double slope = p * r.dot(step);
            for (double t = t0; t > t_min; t *= 0.5) {
                Vec zn = z + t * step;
                avoid_atoms(zn);
                double fn = pbary_objective(cfg, zn);
                if (fn < f0 && fn <= f0 - 1e-4 * t * slope) {
                    out = zn;
                    fout = fn;
                    return true;
                }
            }
            return false;
        };

        // The step is below the floating-point resolution of z: the residual
        // target is not representable (minimizer within ulps of an atom).
        if (newton && dir.norm() <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(z.norm(), diam)) {
            sol.z = z;
            sol.iterations = it;
            finish(cfg, opts, sol);
            return sol;
        }

        Vec cand;
        double fcand = f0;
        bool moved = false;
        if (newton) moved = armijo(dir, 1.0, 1e-10, cand, fcand);
        if (!moved && newton) {
            // Near convergence the objective no longer resolves the decrease.
            Vec zn = z + dir;
            avoid_atoms(zn);
            double fn = pbary_objective(cfg, zn);
            if (std::abs(fn - f0) <= 1e-13 * std::abs(f0) && el_residual(cfg, zn).norm() < rn) {
                cand = zn;
                moved = true;
            }
        }
        if (p < 2.0) {
            // Majorize-minimize step, monotone for 1 < p <= 2.
            Vec num = Vec::Zero(d);
            double den = 0.0;
            for (int i = 0; i < n; ++i) {
                double w = cfg.weights[i] * std::pow((cfg.points[i] - z).norm(), p - 2.0);
                num += w * cfg.points[i];
                den += w;
            }
            Vec zm = num / den;
            avoid_atoms(zm);
            double fm = pbary_objective(cfg, zm);
            if (fm < fcand && fm < f0 - 1e-15 * std::abs(f0)) {
                cand = zm;
                fcand = fm;
                moved = true;
            }
        }
        if (!moved) moved = armijo(r / rn, 0.5 * diam, 1e-20, cand, fcand);
        if (moved) z = cand;
        if (!moved) break;
    }
    throw ConvergenceError("p-barycenter solver did not converge (residual " + std::to_string(best_res) + ")", best,
                           best_res, opts.max_iterations);
}

bool CurvatureBlocks::has_singular() const {
    return std::any_of(singular.begin(), singular.end(), [](bool b) { return b; });
}

CurvatureBlocks curvature_blocks(const WeightedPointConfig& cfg, const Vec& z, double eps) {
    cfg.validate();
    const int n = cfg.size();
    const int d = cfg.dim();
    const double p = cfg.p;
    const double thr = eps * diameter(cfg.points);
    const Mat id = Mat::Identity(d, d);
    CurvatureBlocks cb;
    cb.H.assign(n, Mat::Zero(d, d));
    cb.singular.assign(n, false);
    cb.Lambda.assign(n, 0.0);
    cb.Hbar = Mat::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        Vec w = cfg.points[i] - z;
        double r = w.norm();
        if (is_p_two(p)) {
            cb.H[i] = cfg.weights[i] * id;
        } else if (r <= thr || r == 0.0) {
            if (p < 2.0) cb.singular[i] = true;
        } else {
            Vec u = w / r;
            cb.H[i] = cfg.weights[i] * std::pow(r, p - 2.0) * ((p - 2.0) * u * u.transpose() + id);
        }
        cb.Hbar += cb.H[i];
    }
    if (cb.has_singular()) {
        cb.Hbar = Mat::Constant(d, d, std::numeric_limits<double>::infinity());
        for (int i = 0; i < n; ++i) cb.Lambda[i] = cb.singular[i] ? std::numeric_limits<double>::infinity() : 0.0;
        return cb;
    }
    double hmax = max_sym_eigenvalue(cb.Hbar);
    double hmin = min_sym_eigenvalue(cb.Hbar);
    if (!(hmax > 0.0) || hmin <= 1e-14 * hmax)
        throw DegenerateError("Hbar is singular: all points coincide with the barycenter");
    Eigen::LDLT<Mat> ldlt(cb.Hbar);
    for (int i = 0; i < n; ++i) {
        Mat m = cb.H[i] * ldlt.solve(cb.H[i]);
        cb.Lambda[i] = min_sym_eigenvalue(m);
    }
    return cb;
}

Mat dbary_dxi(const WeightedPointConfig& cfg, const Vec& z, int i, double eps) {
    cfg.validate();
    if (i < 0 || i >= cfg.size()) throw ValidationError("i", "index out of range");
    if (diameter(cfg.points) == 0.0)
        throw DegenerateError("derivative of the barycenter is undefined on the full diagonal");
    const int d = cfg.dim();
    if (is_p_two(cfg.p)) return cfg.weights[i] * Mat::Identity(d, d);
    CurvatureBlocks cb = curvature_blocks(cfg, z, eps);
    if (cb.has_singular())
        throw DomainError("singular curvature block: a point coincides with the barycenter for p < 2");
    return cb.Hbar.ldlt().solve(cb.H[i]);
}

double min_sym_eigenvalue(const Mat& m) {
    Mat s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_sym_eigenvalue(const Mat& m) {
    Mat s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace wbary
