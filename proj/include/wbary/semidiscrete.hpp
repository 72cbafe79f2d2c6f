#pragma once

#include "wbary/barycenter.hpp"
#include "wbary/grid.hpp"

#include <string>
#include <vector>

namespace wbary {

// First marginal absolutely continuous, the others Dirac masses at the anchors.
struct DiracConfiguration {
    std::vector<Vec> anchors;     // x̂_2..x̂_N
    std::vector<double> weights;  // lambda_1..lambda_N
    double p = 2.0;

    int size() const { return static_cast<int>(weights.size()); }
    int dim() const { return anchors.empty() ? 0 : static_cast<int>(anchors.front().size()); }
    double lambda1() const { return weights.front(); }
    void validate() const;
    WeightedPointConfig with_first(const Vec& x1) const;
};

enum class Singularity { none, fixed_point, anchor };
std::string to_string(Singularity s);

// The map b(x1) = x̄_p(x1, x̂) and its explicit inverse.
class SemidiscreteMap {
public:
    explicit SemidiscreteMap(DiracConfiguration cfg, SolverOptions opts = {});

    const DiracConfiguration& config() const { return cfg_; }
    double alpha() const { return alpha_; }
    // Reduced barycenter z̄ = x̄_p(x̂), the unique fixed point of b.
    const Vec& fixed_point() const { return zbar_; }
    double anchor_diameter() const { return diam_; }

    Vec gbar(const Vec& z) const;
    Mat grad_gbar(const Vec& z) const;
    Vec forward(const Vec& x1) const;
    Vec inverse(const Vec& z) const;
    // Throws DomainError at excluded singular points.
    Mat grad_inverse(const Vec& z) const;
    double jacobian_inverse(const Vec& z) const;  // |det grad_inverse|
    Singularity singularity_at(const Vec& z) const;
    // Points where the Jacobian of b^{-1} blows up: z̄ for p>2, the anchors for p<2.
    std::vector<Vec> singular_points() const;
    // Pushforward density value g(z) = f1(b^{-1}(z)) J(z).
    double density(const DensityFn& f1, const Vec& z) const;

private:
    DiracConfiguration cfg_;
    SolverOptions opts_;
    double alpha_;
    double diam_;
    double excl_;
    Vec zbar_;
};

Vec gbar(const DiracConfiguration& cfg, const Vec& z);
Vec b_forward(const DiracConfiguration& cfg, const Vec& x1, double tol = 1e-12);
Vec b_inverse(const DiracConfiguration& cfg, const Vec& z);
Mat grad_b_inverse(const DiracConfiguration& cfg, const Vec& z);

// Real parts of the eigenvalues of a matrix similar to a symmetric one.
Vec real_spectrum(const Mat& m);

struct BoundsReportGe2 {
    double min_eig = 0, max_eig = 0;
    double lower_margin = 0;  // min_eig - 1
    double dist = 0;          // |z - z̄|
    double M = 0;             // max_i |x̂_i - z|
    // Upper bound is 1 + C * upper_shape; c_needed is the smallest C for which it holds at z.
    double upper_shape = 0;
    double c_needed = 0;
    // Two-sided bound 1 + c A / (lambda_1^{1-alpha} |Ḡ|^alpha) with c = 1-alpha (lower), p-1 (upper),
    // A = sum_i lambda_i |x̂_i - z|^{p-2}.
    double explicit_lower = 0, explicit_upper = 0;
    double explicit_lower_margin = 0, explicit_upper_margin = 0;
    // lambda_1^{1-alpha} |z - z̄|^alpha * eig
    double scaled_min = 0, scaled_max = 0;
};
BoundsReportGe2 check_bounds_p_ge2(const SemidiscreteMap& map, const Vec& z);

struct BoundsReportLt2 {
    double min_eig = 0, max_eig = 0;  // of grad b^{-1} - Id
    double lower = 0, upper = 0;
    double lower_margin = 0, upper_margin = 0;
    double dist = 0, m = 0, M = 0;
    // Two-sided bound c Ã |Ḡ|^beta / lambda_1^{1+beta} with c = p-1 (lower), 1+beta (upper),
    // Ã = sum_i lambda_i |x̂_i - z|^{p-2}.
    double explicit_lower = 0, explicit_upper = 0;
    double explicit_lower_margin = 0, explicit_upper_margin = 0;
};
BoundsReportLt2 check_bounds_p_lt2(const SemidiscreteMap& map, const Vec& z);

struct PushforwardOptions {
    std::vector<int> res;       // output cells per axis
    int refine = 8;             // subsamples per axis in cells near singular points
    double refine_cells = 2.0;  // refinement radius in output cells
    double warn_mass_error = 0.05;
};

struct PushforwardResult {
    GridDensity g;
    double mass = 0;
    double source_mass = 0;
    double mass_error = 0;  // |mass - source_mass| / source_mass
    bool coarse_warning = false;
    std::size_t refined_cells = 0;
};

PushforwardResult pushforward_density(const SemidiscreteMap& map, const GridDensity& f1, const PushforwardOptions& opts);
// f1 must vanish outside [lo, hi]; source_mass is taken as 1.
PushforwardResult pushforward_density(const SemidiscreteMap& map, const DensityFn& f1, const Vec& lo, const Vec& hi,
                                      const PushforwardOptions& opts);

double lq_norm(const GridDensity& g, double q);

struct LqEstimate {
    double value = 0;  // integral of |g|^q
    bool finite = true;
    std::size_t skipped = 0;
    // Sums at source subsampling 1, 2, 4, ... per axis (filled when divergence is suspected
    // or levels were requested).
    std::vector<double> level_sums;
};

// integral of f1^q (J_{b^{-1}} o b)^{q-1} over the source grid.
LqEstimate lq_via_changevar(const SemidiscreteMap& map, const GridDensity& f1, double q, int levels = 1);

enum class Verdict { integrable, not_integrable, indeterminate };
std::string to_string(Verdict v);

struct BlowupFit {
    double slope = 0, intercept = 0, r2 = 0;
    double q0 = 0;  // d / |slope|, +inf when slope >= 0
    std::vector<double> radii, means;
    std::vector<std::pair<double, Verdict>> verdicts;
};

// Least-squares fit of log(mean g over annulus [r, 2r)) against log(1.5 r).
// Throws InsufficientDataError when fewer than 4 annuli are usable.
BlowupFit blowup_exponent(const SemidiscreteMap& map, const DensityFn& f1, const Vec& center,
                          const std::vector<double>& radii, const std::vector<double>& qs, double margin = 0.1);
// Same fit from cell values of a grid density.
BlowupFit blowup_exponent_grid(const GridDensity& g, const Vec& center, const std::vector<double>& radii,
                               const std::vector<double>& qs, double margin = 0.1);

std::vector<double> dyadic_radii(double r_max, int count);

}  // namespace wbary
