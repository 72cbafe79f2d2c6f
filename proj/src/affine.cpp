#include "wbary/affine.hpp"

#include "wbary/error.hpp"
#include "wbary/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace wbary {

namespace {

struct BlockForm {
    Mat P;  // projector onto the eigenvalue-1 eigenspace
    double zeta = 1.0;
    bool identity = false;
    bool ok = false;
};

double spectral_scale(const Mat& A) { return std::max(1.0, A.cwiseAbs().rowwise().sum().maxCoeff()); }

bool is_symmetric(const Mat& A, double tol) {
    return (A - A.transpose()).norm() <= tol * std::max(1.0, A.norm());
}

BlockForm block_form(const Mat& A, double tol) {
    BlockForm b;
    if (A.rows() != A.cols() || !is_symmetric(A, tol)) return b;
    const int d = static_cast<int>(A.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
    const Vec& ev = es.eigenvalues();
    const double s = std::max(1.0, ev.cwiseAbs().maxCoeff());
    b.P = Mat::Zero(d, d);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    int others = 0;
    for (int k = 0; k < d; ++k) {
        if (std::abs(ev(k) - 1.0) <= tol * s) {
            b.P += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
        } else {
            lo = std::min(lo, ev(k));
            hi = std::max(hi, ev(k));
            sum += ev(k);
            ++others;
        }
    }
    b.identity = others == 0;
    b.zeta = others == 0 ? 1.0 : sum / others;
    b.ok = others == 0 || hi - lo <= tol * s;
    return b;
}

double matrix_norm2(const Mat& A) {
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

// Common block form of all matrices: P shared by the non-identity ones.
bool common_block_form(const std::vector<Mat>& ms, double tol, Mat& P, std::vector<double>& zeta) {
    const int d = static_cast<int>(ms.front().rows());
    bool have_p = false;
    P = Mat::Identity(d, d);
    zeta.clear();
    for (const auto& A : ms) {
        BlockForm b = block_form(A, tol);
        if (!b.ok) return false;
        zeta.push_back(b.zeta);
        if (b.identity) continue;
        if (!have_p) {
            P = b.P;
            have_p = true;
        } else if ((P - b.P).norm() > tol * d) {
            return false;
        }
    }
    return true;
}

void check_square_family(const std::vector<Mat>& ms, const std::vector<double>& weights) {
    if (ms.empty()) throw ValidationError("matrices", "empty list");
    check_weights(weights, ms.size());
    const auto d = ms.front().rows();
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string f = "matrices[" + std::to_string(i) + "]";
        if (ms[i].rows() != d || ms[i].cols() != d) throw ValidationError(f, "shape mismatch");
        if (!ms[i].allFinite()) throw ValidationError(f, "non-finite entry");
    }
}

}  // namespace

MatrixPbary matrix_pbary(const std::vector<Mat>& matrices, const std::vector<double>& weights, double p,
                         const MatrixPbaryOptions& opts) {
    check_square_family(matrices, weights);
    const int d = static_cast<int>(matrices.front().rows());
    MatrixPbary out;
    Mat P;
    std::vector<double> zeta;
    if (opts.allow_fast_path && common_block_form(matrices, opts.tol.eigen, P, zeta)) {
        WeightedPointConfig cfg;
        cfg.p = p;
        cfg.weights = weights;
        for (double z : zeta) cfg.points.push_back(Vec::Constant(1, z));
        const double zbar = pbary_solve(cfg, opts.solver).z(0);
        out.value = P + zbar * (Mat::Identity(d, d) - P);
        out.fast_path = true;
        return out;
    }
    WeightedPointConfig cfg;
    cfg.p = p;
    cfg.weights = weights;
    for (const auto& A : matrices) cfg.points.push_back(Eigen::Map<const Vec>(A.data(), A.size()));
    Vec z = pbary_solve(cfg, opts.solver).z;
    out.value = Eigen::Map<const Mat>(z.data(), d, d);
    return out;
}

SpectrumVerdict spectrum_optimality(const Mat& A, double tol) {
    if (A.rows() != A.cols()) throw ValidationError("A", "matrix is not square");
    if (!is_symmetric(A, tol)) throw StructureError("A: matrix is not symmetric");
    SpectrumVerdict v;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
    v.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    BlockForm b = block_form(A, tol);
    const double s = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    v.zeta = b.zeta;
    v.optimal = b.ok && b.zeta >= -tol * s;
    return v;
}

std::string to_string(AffineKind k) { return k == AffineKind::translation ? "translation" : "linear"; }

AffineBarycenter affine_barycenter(const std::vector<AffineMap>& maps, const std::vector<double>& weights, double p,
                                   const MatrixPbaryOptions& opts) {
    if (maps.empty()) throw ValidationError("maps", "empty list");
    check_weights(weights, maps.size());
    const int d = maps.front().dim();
    double vscale = 1.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const std::string f = "maps[" + std::to_string(i) + "]";
        if (maps[i].v.size() != d) throw ValidationError(f + ".v", "dimension mismatch");
        if (maps[i].A.rows() != d || maps[i].A.cols() != d) throw ValidationError(f + ".A", "shape mismatch");
        if (!maps[i].A.allFinite() || !maps[i].v.allFinite()) throw ValidationError(f, "non-finite entry");
        vscale = std::max(vscale, maps[i].v.cwiseAbs().maxCoeff());
    }
    const double tol = opts.tol.eigen;
    const Mat I = Mat::Identity(d, d);
    bool all_id = true, same_shift = true;
    for (const auto& m : maps) {
        all_id = all_id && (m.A - I).cwiseAbs().maxCoeff() <= tol;
        same_shift = same_shift && (m.v - maps.front().v).cwiseAbs().maxCoeff() <= 1e-12 * vscale;
    }
    AffineBarycenter out;
    if (all_id) {
        WeightedPointConfig cfg;
        cfg.p = p;
        cfg.weights = weights;
        for (const auto& m : maps) cfg.points.push_back(m.v);
        Vec vbar = pbary_solve(cfg, opts.solver).z;
        out.kind = AffineKind::translation;
        out.bar = {I, vbar};
        out.transport = {I, vbar - maps.front().v};
        out.zeta.assign(maps.size(), 1.0);
        return out;
    }
    if (!same_shift) throw StructureError("maps: different shifts combined with non-identity matrices");
    std::vector<Mat> ms;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const Mat& A = maps[i].A;
        const std::string f = "maps[" + std::to_string(i) + "].A";
        if (!is_symmetric(A, tol)) throw StructureError(f + ": matrix is not symmetric");
        SpectrumVerdict sv = spectrum_optimality(A, tol);
        if (!sv.optimal) throw StructureError(f + ": spectrum is not contained in {1, zeta} with zeta >= 0");
        for (std::size_t j = 0; j < i; ++j) {
            const Mat& B = maps[j].A;
            if ((A * B - B * A).norm() > opts.tol.commutator * A.norm() * B.norm())
                throw StructureError(f + ": does not commute with maps[" + std::to_string(j) + "].A");
        }
        ms.push_back(A);
    }
    Mat P;
    std::vector<double> zeta;
    if (!common_block_form(ms, tol, P, zeta))
        throw StructureError("maps: eigenvalue-1 eigenspaces of the non-identity matrices differ");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ms.front() + ms.front().transpose()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().cwiseAbs().minCoeff() <= tol * spectral_scale(ms.front()))
        throw DegenerateError("maps[0].A is singular");
    MatrixPbary mb = matrix_pbary(ms, weights, p, opts);
    const Vec& v = maps.front().v;
    out.kind = AffineKind::linear;
    out.bar = {mb.value, v};
    Mat M = mb.value * ms.front().inverse();
    out.transport = {M, v - M * v};
    out.zeta = zeta;
    out.fast_path = mb.fast_path;
    return out;
}

DiscreteMeasure push_forward(const DiscreteMeasure& mu, const AffineMap& map) {
    std::vector<Vec> atoms;
    atoms.reserve(mu.atoms.size());
    for (const auto& x : mu.atoms) atoms.push_back(map(x));
    return make_measure(std::move(atoms), mu.masses);
}

DiscreteMeasure discretize(const GridDensity& g) {
    std::vector<Vec> atoms;
    std::vector<double> masses;
    double total = 0.0;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        if (g.values[c] <= 0.0) continue;
        atoms.push_back(g.center(c));
        masses.push_back(g.values[c] * g.cell_volume());
        total += masses.back();
    }
    if (atoms.empty()) throw DegenerateError("grid density has no mass");
    for (auto& m : masses) m /= total;
    return make_measure(std::move(atoms), std::move(masses), "grid");
}

AffineMmotReport verify_affine_vs_mmot(const DiscreteMeasure& mu, double h, const std::vector<AffineMap>& maps,
                                       const std::vector<double>& weights, double p, const MmotOptions& opts) {
    mu.validate("mu");
    MatrixPbaryOptions mo;
    mo.solver = opts.solver;
    AffineBarycenter ab = affine_barycenter(maps, weights, p, mo);
    std::vector<DiscreteMeasure> marginals;
    for (const auto& m : maps) marginals.push_back(push_forward(mu, m));
    TransportPlan plan = solve_mmot(marginals, weights, p, opts);
    AffineMmotReport r;
    r.closed_form = push_forward(mu, ab.bar);
    r.mmot = barycenter_measure(plan);
    r.objective = plan.objective;
    r.gap = wp_distance(r.closed_form, r.mmot, p, opts);
    r.h = h;
    r.tolerance = 3.0 * h * std::max(1.0, matrix_norm2(ab.bar.A));
    r.pass = r.gap <= std::max(r.tolerance, 1e-9);
    return r;
}

AffineMmotReport verify_affine_vs_mmot(const GridDensity& mu, const std::vector<AffineMap>& maps,
                                       const std::vector<double>& weights, double p, const MmotOptions& opts) {
    mu.validate("mu");
    return verify_affine_vs_mmot(discretize(mu), mu.pitch(), maps, weights, p, opts);
}

NodeGrid::NodeGrid(Vec lo_, Vec hi_, std::vector<int> n_) : lo(std::move(lo_)), hi(std::move(hi_)), n(std::move(n_)) {
    if (lo.size() != hi.size() || static_cast<int>(n.size()) != lo.size())
        throw ValidationError("grid", "lo, hi and n must have the same dimension");
    for (int a = 0; a < dim(); ++a) {
        if (n[a] < 2) throw ValidationError("grid.n", "at least two nodes per axis");
        if (!(hi(a) > lo(a))) throw ValidationError("grid.hi", "must exceed lo");
    }
    values.assign(size(), 0.0);
}

std::size_t NodeGrid::size() const {
    std::size_t s = 1;
    for (int k : n) s *= static_cast<std::size_t>(k);
    return s;
}

std::vector<int> NodeGrid::unflatten(std::size_t idx) const {
    std::vector<int> m(n.size());
    for (int a = dim() - 1; a >= 0; --a) {
        m[a] = static_cast<int>(idx % n[a]);
        idx /= n[a];
    }
    return m;
}

Vec NodeGrid::node(std::size_t idx) const {
    auto m = unflatten(idx);
    Vec x(dim());
    for (int a = 0; a < dim(); ++a) x(a) = lo(a) + m[a] * spacing(a);
    return x;
}

bool NodeGrid::on_boundary(std::size_t idx) const {
    auto m = unflatten(idx);
    for (int a = 0; a < dim(); ++a)
        if (m[a] == 0 || m[a] == n[a] - 1) return true;
    return false;
}

NodeGrid sample_nodes(const std::function<double(const Vec&)>& f, const Vec& lo, const Vec& hi,
                      const std::vector<int>& n) {
    NodeGrid g(lo, hi, n);
    for (std::size_t k = 0; k < g.size(); ++k) g.values[k] = f(g.node(k));
    return g;
}

PTransform p_transform(const NodeGrid& phi, double p, const NodeGrid& target) {
    if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p", "must be finite and > 1");
    if (phi.values.size() != phi.size()) throw ValidationError("phi", "value count does not match the grid");
    if (target.dim() != phi.dim()) throw ValidationError("target", "dimension mismatch");
    for (double v : phi.values)
        if (!std::isfinite(v)) throw ValidationError("phi", "non-finite value");
    const std::size_t ns = phi.size(), nt = target.size();
    std::vector<Vec> xs(ns);
    std::vector<char> boundary(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        xs[k] = phi.node(k);
        boundary[k] = phi.on_boundary(k);
    }
    PTransform out;
    out.value = target;
    std::vector<char> escaped(nt, 0), interior(nt, 0);
    parallel_for(nt, [&](std::size_t t) {
        const Vec y = target.node(t);
        double in = std::numeric_limits<double>::infinity(), bd = in;
        for (std::size_t k = 0; k < ns; ++k) {
            const double v = std::pow((xs[k] - y).norm(), p) / p - phi.values[k];
            double& slot = boundary[k] ? bd : in;
            slot = std::min(slot, v);
        }
        out.value.values[t] = std::min(in, bd);
        const double tie = 1e-12 * (1.0 + std::abs(out.value.values[t]));
        escaped[t] = bd < in - tie;
        interior[t] = in < bd - tie;
    });
    std::size_t strictly_interior = 0;
    for (std::size_t t = 0; t < nt; ++t) {
        out.escaping += escaped[t];
        strictly_interior += interior[t];
    }
    out.degenerate = strictly_interior == 0 && out.escaping > 0;
    return out;
}

PTransform p_transform(const NodeGrid& phi, double p) { return p_transform(phi, p, phi); }

PConcavityReport p_concavity_check(const NodeGrid& phi, double p) {
    PConcavityReport r;
    PTransform first = p_transform(phi, p);
    r.transform = first.value;
    if (first.degenerate) {
        r.degenerate = true;
        return r;
    }
    PTransform second = p_transform(first.value, p);
    r.double_transform = second.value;
    const int d = phi.dim();
    for (std::size_t k = 0; k < phi.size(); ++k) {
        auto m = phi.unflatten(k);
        bool central = true;
        for (int a = 0; a < d; ++a) {
            const double mid = 0.5 * (phi.n[a] - 1);
            central = central && std::abs(m[a] - mid) <= 0.25 * (phi.n[a] - 1) + 1e-9;
            if (m[a] + 1 < phi.n[a]) {
                std::vector<int> nb = m;
                ++nb[a];
                std::size_t j = 0;
                for (int b = 0; b < d; ++b) j = j * phi.n[b] + nb[b];
                r.tolerance = std::max(r.tolerance, std::abs(phi.values[j] - phi.values[k]));
            }
        }
        if (!central) continue;
        ++r.interior_nodes;
        r.sup_error = std::max(r.sup_error, std::abs(second.value.values[k] - phi.values[k]));
    }
    r.pass = r.interior_nodes > 0 && r.sup_error <= r.tolerance;
    return r;
}

double g_p(double lambda, double p) {
    const double a = std::abs(lambda);
    return std::pow(a / (1.0 + a), p - 1.0);
}

}  // namespace wbary
