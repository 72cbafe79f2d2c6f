#pragma once

#include "wbary/barycenter.hpp"
#include "wbary/grid.hpp"
#include "wbary/mmot.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace wbary {

struct SupportGeometry {
    double D = 0.0;       // min over tuples of |x̄_p(x_1..x_N) - x̄_p(x_2..x_N)|
    double m = 0.0;       // min over tuples and i of |x_i - x̄_p(x_1..x_N)|
    double M_diam = 0.0;  // all supports lie in the closed ball of radius M/2 about the origin
};

double compute_D(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                 const MmotOptions& opts = {});
double compute_m(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                 const MmotOptions& opts = {});
double enclosing_diameter(const std::vector<DiscreteMeasure>& measures);
SupportGeometry support_geometry(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights,
                                 double p, const MmotOptions& opts = {});

// C / (lambda_1^{d(1-alpha_p)} G^{d|p-2|})^{(q-1)/q} * ||f_1||_q with G = D for p >= 2 and G = m for p < 2.
// Throws DegenerateError when the relevant geometric quantity vanishes (p != 2).
double integrability_bound(double f1_lq, const SupportGeometry& geometry, double q, double p, double lambda1, int d,
                           double C = 1.0);

using PointMap = std::function<Vec(const Vec&)>;

struct GeneralLqOptions {
    int levels = 3;  // source subsampling 1, 2, 4, ... per axis
    double eps_S = 1e-9;
    double divergence_ratio = 0.9;
    bool keep_cells = false;
    SolverOptions solver;
};

struct LqCell {
    Vec x;
    std::string S;  // 1-based indices joined by '+', empty when no point coincides
    double ratio;   // max_{i not in S} |H_i| / min_{i not in S} Lambda_i, 0 on cells with 1 in S
    double f;
};

struct GeneralLqReport {
    // Right side with the prefactor 2^{d(q-1)} that follows from the injectivity constant 1/2.
    double value = 0.0;
    // Right side with the prefactor 1/2 applied to the second integral.
    double value_half_prefactor = 0.0;
    double diagonal_part = 0.0;  // integral of f_1^q over cells with 1 in S
    double ratio_part = 0.0;     // integral of ratio^{d(q-1)} f_1^q over the other cells
    bool diverging = false;
    std::vector<double> level_sums;
    std::size_t near_singular = 0;
    std::size_t cells_in_F1 = 0, cells_other = 0;
    std::vector<LqCell> cells;
};

// maps[k] is T_{k+2}; the tuple at x_1 is (x_1, T_2(x_1), ..., T_N(x_1)).
GeneralLqReport general_lq_bound(const GridDensity& f1, const std::vector<PointMap>& maps,
                                 const std::vector<double>& weights, double p, double q,
                                 const GeneralLqOptions& opts = {});
// Semidiscrete case: constant maps onto the anchors.
GeneralLqReport general_lq_bound(const GridDensity& f1, const std::vector<Vec>& anchors,
                                 const std::vector<double>& weights, double p, double q,
                                 const GeneralLqOptions& opts = {});
// columns x0..x{d-1}, S, ratio, f
void write_cells_csv(const GeneralLqReport& report, std::ostream& os);

struct InjectivityOptions {
    int k_max = 40;
    std::size_t sample_pairs = 5000;
    std::uint64_t seed = 1;
    double eps_S = 1e-9;
    double slack = 1e-9;
};

struct InjectivityReport {
    bool pass = true;
    bool vacuous = true;   // no pair of distinct same-class points within the final radius
    int k0 = 0;            // radius 2^{-k0} * diam
    double radius = 0.0;
    double constant = 0.0; // (1/2) min Lambda_i / max |H_i| at the base point, i not in S
    std::string S;
    std::size_t candidates = 0;
    std::size_t pairs_at_k0 = 0;
    std::size_t violations_at_k0_minus_1 = 0;
    double worst_margin = 0.0;  // min over checked pairs at k0 of lhs - rhs
};

// Local injectivity of x̄_p on the plan support around entries[base].
InjectivityReport local_injectivity_check(const TransportPlan& plan, std::size_t base,
                                          const InjectivityOptions& opts = {});

}  // namespace wbary
