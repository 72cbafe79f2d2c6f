#pragma once

#include "wbary/barycenter.hpp"
#include "wbary/grid.hpp"
#include "wbary/mmot.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace wbary {

struct AffineMap {
    Mat A;
    Vec v;

    int dim() const { return static_cast<int>(v.size()); }
    Vec operator()(const Vec& x) const { return A * x + v; }
};

struct AffineTolerances {
    double commutator = 1e-9;  // relative to |A_i| |A_j|
    double eigen = 1e-8;       // eigenvalue clustering, relative to max(1, |A|_2)
};

// Frobenius p-barycenter of matrices. The block form P + zeta (Id - P) shared by
// all inputs is detected and solved as a scalar barycenter of the zeta_i.
struct MatrixPbaryOptions {
    bool allow_fast_path = true;
    AffineTolerances tol;
    SolverOptions solver;
};

struct MatrixPbary {
    Mat value;
    bool fast_path = false;
};

MatrixPbary matrix_pbary(const std::vector<Mat>& matrices, const std::vector<double>& weights, double p,
                         const MatrixPbaryOptions& opts = {});

struct SpectrumVerdict {
    bool optimal = false;
    double zeta = 1.0;  // common non-unit eigenvalue, 1 when every eigenvalue is 1
    std::vector<double> eigenvalues;
};

// Throws StructureError when A is not symmetric within tol.
SpectrumVerdict spectrum_optimality(const Mat& A, double tol = 1e-8);

enum class AffineKind { translation, linear };
std::string to_string(AffineKind k);

struct AffineBarycenter {
    AffineKind kind = AffineKind::translation;
    AffineMap bar;        // (Ā, v̄): the barycenter is (Ā x + v̄)_# mu
    AffineMap transport;  // bar_p as a map from mu_1
    std::vector<double> zeta;
    bool fast_path = false;
};

// Translations (all A_i = Id) or the structured linear class with a common shift.
// Throws StructureError on other inputs and DegenerateError when A_1 is singular.
AffineBarycenter affine_barycenter(const std::vector<AffineMap>& maps, const std::vector<double>& weights, double p,
                                   const MatrixPbaryOptions& opts = {});

DiscreteMeasure push_forward(const DiscreteMeasure& mu, const AffineMap& map);
// Cell centers carrying the cell masses, zero cells dropped.
DiscreteMeasure discretize(const GridDensity& g);

struct AffineMmotReport {
    double gap = 0.0;  // W_p between the closed form and the MMOT barycenter
    double h = 0.0;
    double tolerance = 0.0;  // 3 h max(1, |Ā|_2)
    bool pass = false;
    double objective = 0.0;
    DiscreteMeasure closed_form;
    DiscreteMeasure mmot;
};

AffineMmotReport verify_affine_vs_mmot(const DiscreteMeasure& mu, double h, const std::vector<AffineMap>& maps,
                                       const std::vector<double>& weights, double p, const MmotOptions& opts = {});
AffineMmotReport verify_affine_vs_mmot(const GridDensity& mu, const std::vector<AffineMap>& maps,
                                       const std::vector<double>& weights, double p, const MmotOptions& opts = {});

// Function sampled on the nodes lo + k (hi - lo) / (n - 1), first axis slowest.
struct NodeGrid {
    Vec lo, hi;
    std::vector<int> n;
    std::vector<double> values;

    NodeGrid() = default;
    NodeGrid(Vec lo, Vec hi, std::vector<int> n);

    int dim() const { return static_cast<int>(lo.size()); }
    std::size_t size() const;
    double spacing(int axis) const { return (hi(axis) - lo(axis)) / (n[axis] - 1); }
    std::vector<int> unflatten(std::size_t idx) const;
    Vec node(std::size_t idx) const;
    bool on_boundary(std::size_t idx) const;
};

NodeGrid sample_nodes(const std::function<double(const Vec&)>& f, const Vec& lo, const Vec& hi,
                      const std::vector<int>& n);

struct PTransform {
    NodeGrid value;
    std::size_t escaping = 0;  // targets whose infimum is attained only on the source boundary
    bool degenerate = false;   // at least half of the targets escape: the continuum transform is -inf there
};

// phi^p(y) = min over source nodes x of |x - y|^p / p - phi(x), evaluated on the nodes of `target`.
PTransform p_transform(const NodeGrid& phi, double p, const NodeGrid& target);
PTransform p_transform(const NodeGrid& phi, double p);

struct PConcavityReport {
    double sup_error = 0.0;  // max |(phi^p)^p - phi| over the central half of the grid
    double tolerance = 0.0;  // largest change of phi between neighbouring nodes
    std::size_t interior_nodes = 0;
    bool degenerate = false;
    bool pass = false;
    NodeGrid transform;
    NodeGrid double_transform;
};

// The data are assumed to live in the central half of the grid, so the padding is twice their radius.
PConcavityReport p_concavity_check(const NodeGrid& phi, double p);

// (|lambda| / (1 + |lambda|))^{p-1}
double g_p(double lambda, double p);

}  // namespace wbary
