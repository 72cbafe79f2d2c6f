#pragma once

#include "wbary/barycenter.hpp"
#include "wbary/lp.hpp"

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace wbary {

struct DiscreteMeasure {
    std::vector<Vec> atoms;
    std::vector<double> masses;

    int size() const { return static_cast<int>(atoms.size()); }
    int dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms.front().size()); }
    void validate(const std::string& field = "measure") const;
};

// Validates and merges exactly coincident atoms.
DiscreteMeasure make_measure(std::vector<Vec> atoms, std::vector<double> masses, const std::string& field = "measure");
DiscreteMeasure dirac(const Vec& x);
// Merges atoms closer than tol (greedy, in input order).
DiscreteMeasure merge_atoms(const DiscreteMeasure& mu, double tol);
double support_diameter(const std::vector<DiscreteMeasure>& measures);

struct MmotOptions {
    std::size_t cap = 1'000'000;  // maximum number of multi-indices
    SolverOptions solver;
    LpOptions lp;
};

// c_p(x_1, ..., x_N) = sum_i lambda_i |x_i - x̄_p|^p.
double cp_cost(const std::vector<Vec>& tuple, const std::vector<double>& weights, double p, Vec* bary = nullptr,
               const SolverOptions& opts = {});

struct CostTensor {
    std::vector<int> shape;   // K_1..K_N, first index slowest
    std::vector<double> cost;
    std::vector<Vec> bary;

    std::size_t size() const { return cost.size(); }
    std::vector<int> unflatten(std::size_t idx) const;
    std::size_t flatten(const std::vector<int>& index) const;
};

std::size_t product_size(const std::vector<DiscreteMeasure>& measures);
void check_weights(const std::vector<double>& weights, std::size_t n, const std::string& field = "weights");
CostTensor cost_tensor(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                       const MmotOptions& opts = {});

struct PlanEntry {
    std::vector<int> index;
    double mass = 0.0;
    double cost = 0.0;
    Vec bary;
};

struct TransportPlan {
    std::vector<DiscreteMeasure> marginals;
    std::vector<double> weights;
    double p = 2.0;
    std::vector<PlanEntry> entries;  // strictly positive masses only
    double objective = 0.0;
    double marginal_residual = 0.0;  // max-norm
    bool alternative_optima = false;
    long iterations = 0;
    long degenerate_pivots = 0;

    std::vector<Vec> tuple(const std::vector<int>& index) const;
    // columns i1..iN (0-based atom indices), mass, cost, z0..z{d-1}
    void write_csv(std::ostream& os) const;
};

TransportPlan solve_mmot(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                         const MmotOptions& opts = {});
TransportPlan solve_mmot(const CostTensor& tensor, const std::vector<DiscreteMeasure>& measures,
                         const std::vector<double>& weights, double p, const MmotOptions& opts = {});
double product_plan_cost(const CostTensor& tensor, const std::vector<DiscreteMeasure>& measures);
double marginal_residual(const TransportPlan& plan);

// Pushforward of the plan through x̄_p; atoms within merge_rel * diameter are merged.
DiscreteMeasure barycenter_measure(const TransportPlan& plan, double merge_rel = 1e-9);

struct TwoMarginalResult {
    double cost = 0.0;  // W_p^p
    std::vector<double> phi, psi;  // phi_j + psi_k <= |x_j - y_k|^p with equality on the plan support
    std::vector<PlanEntry> entries;
    bool alternative_optima = false;
};
TwoMarginalResult ot_two_marginal(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                                  const MmotOptions& opts = {});
double wp_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, const MmotOptions& opts = {});

struct EquivalenceReport {
    double c_mm = 0.0;
    double sum_wp = 0.0;  // sum_i lambda_i W_p^p(mu_i, nu_p)
    double gap = 0.0;
    double tol = 0.0;
    bool pass = false;
    DiscreteMeasure nu;
    TransportPlan plan;
};
EquivalenceReport verify_c2m_equivalence(const std::vector<DiscreteMeasure>& measures,
                                         const std::vector<double>& weights, double p, const MmotOptions& opts = {});

struct MonotoneReport {
    bool pass = true;
    std::size_t pairs = 0;
    std::size_t swaps = 0;
    double worst = 0.0;  // most negative c(a')+c(b')-c(a)-c(b)
    std::size_t worst_a = 0, worst_b = 0;
    unsigned worst_mask = 0;
};
MonotoneReport check_cp_monotone(const TransportPlan& plan, double tol = 1e-9);

struct GraphReport {
    bool is_graph = true;
    bool warning_only = false;  // nonunique optimum: failure is not conclusive
    std::size_t multi_valued_atoms = 0;
};
// Each atom of the first marginal with positive mass appears in exactly one support multi-index.
GraphReport check_graph_over_first(const TransportPlan& plan);

struct DualCheckReport {
    std::vector<double> wp;  // W_p^p(mu_i, nu_p)
    std::vector<std::vector<double>> phi, psi;
    std::vector<double> h;  // sum_i lambda_i psi_i on the atoms of nu_p
    double spread = 0.0;
    double variance = 0.0;  // nu_p-weighted
    bool nonunique = false;
    std::string status;  // "exact" or "best_effort"
    DiscreteMeasure nu;
};
// Searches the optimal dual faces of the two-marginal problems W_p^p(mu_i, nu_p) for potentials that make
// sum_i lambda_i psi_i as close to constant as possible on the atoms of nu_p.
DualCheckReport dual_check_potentials(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights,
                                      double p, const MmotOptions& opts = {});

}  // namespace wbary
