#include "wbary/mmot.hpp"

#include "wbary/error.hpp"
#include "wbary/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

namespace wbary {

void DiscreteMeasure::validate(const std::string& field) const {
    if (atoms.empty()) throw ValidationError(field + ".atoms", "measure needs at least one atom");
    if (masses.size() != atoms.size())
        throw ValidationError(field + ".masses", "expected " + std::to_string(atoms.size()) + " masses, got " +
                                                     std::to_string(masses.size()));
    const auto d = atoms.front().size();
    if (d < 1) throw ValidationError(field + ".atoms[0]", "dimension must be at least 1");
    double sum = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        std::string at = field + ".atoms[" + std::to_string(j) + "]";
        if (atoms[j].size() != d) throw ValidationError(at, "dimension mismatch");
        if (!atoms[j].allFinite()) throw ValidationError(at, "non-finite coordinate");
        if (!(masses[j] >= 0.0) || !std::isfinite(masses[j]))
            throw ValidationError(field + ".masses[" + std::to_string(j) + "]", "masses must be nonnegative");
        sum += masses[j];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError(field + ".masses", "masses must sum to 1 (got " + std::to_string(sum) + ")");
}

DiscreteMeasure make_measure(std::vector<Vec> atoms, std::vector<double> masses, const std::string& field) {
    DiscreteMeasure mu{std::move(atoms), std::move(masses)};
    mu.validate(field);
    return merge_atoms(mu, 0.0);
}

DiscreteMeasure dirac(const Vec& x) { return DiscreteMeasure{{x}, {1.0}}; }

DiscreteMeasure merge_atoms(const DiscreteMeasure& mu, double tol) {
    DiscreteMeasure out;
    for (int j = 0; j < mu.size(); ++j) {
        bool merged = false;
        for (int k = 0; k < out.size(); ++k) {
            if ((out.atoms[k] - mu.atoms[j]).norm() <= tol) {
                out.masses[k] += mu.masses[j];
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.atoms.push_back(mu.atoms[j]);
            out.masses.push_back(mu.masses[j]);
        }
    }
    return out;
}

double support_diameter(const std::vector<DiscreteMeasure>& measures) {
    std::vector<Vec> all;
    for (const auto& mu : measures) all.insert(all.end(), mu.atoms.begin(), mu.atoms.end());
    return diameter(all);
}

double cp_cost(const std::vector<Vec>& tuple, const std::vector<double>& weights, double p, Vec* bary,
               const SolverOptions& opts) {
    WeightedPointConfig cfg{tuple, weights, p};
    auto sol = pbary_solve(cfg, opts);
    if (bary) *bary = sol.z;
    return pbary_objective(cfg, sol.z);
}

std::vector<int> CostTensor::unflatten(std::size_t idx) const {
    std::vector<int> m(shape.size());
    for (int k = static_cast<int>(shape.size()) - 1; k >= 0; --k) {
        m[k] = static_cast<int>(idx % shape[k]);
        idx /= shape[k];
    }
    return m;
}

std::size_t CostTensor::flatten(const std::vector<int>& index) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) idx = idx * shape[k] + index[k];
    return idx;
}

std::size_t product_size(const std::vector<DiscreteMeasure>& measures) {
    std::size_t n = 1;
    for (const auto& mu : measures) {
        if (mu.size() > 0 && n > std::numeric_limits<std::size_t>::max() / mu.size())
            return std::numeric_limits<std::size_t>::max();
        n *= mu.size();
    }
    return n;
}

void check_weights(const std::vector<double>& weights, std::size_t n, const std::string& field) {
    if (weights.size() != n)
        throw ValidationError(field, "expected " + std::to_string(n) + " weights, got " + std::to_string(weights.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw ValidationError(field + "[" + std::to_string(i) + "]", "weights must be strictly positive");
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError(field, "weights must sum to 1 (got " + std::to_string(sum) + ")");
}

namespace {

void check_inputs(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p) {
    if (measures.size() < 2) throw ValidationError("marginals", "need at least 2 marginals");
    if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p", "exponent must satisfy 1 < p < inf");
    for (std::size_t i = 0; i < measures.size(); ++i) {
        measures[i].validate("marginals[" + std::to_string(i) + "]");
        if (measures[i].dim() != measures[0].dim())
            throw ValidationError("marginals[" + std::to_string(i) + "]", "dimension mismatch");
    }
    check_weights(weights, measures.size());
}

void check_cap(std::size_t n, std::size_t cap, const std::string& what) {
    if (n > cap)
        throw SizeError(what + " has " + std::to_string(n) + " entries, above the cap of " + std::to_string(cap) +
                        "; reduce the number of atoms or raise --cap");
}

}  // namespace

CostTensor cost_tensor(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                       const MmotOptions& opts) {
    check_inputs(measures, weights, p);
    check_cap(product_size(measures), opts.cap, "cost tensor");
    CostTensor t;
    for (const auto& mu : measures) t.shape.push_back(mu.size());
    const std::size_t n = product_size(measures);
    t.cost.assign(n, 0.0);
    t.bary.assign(n, Vec());
    parallel_for(n, [&](std::size_t idx) {
        auto m = t.unflatten(idx);
        std::vector<Vec> tuple(measures.size());
        for (std::size_t i = 0; i < measures.size(); ++i) tuple[i] = measures[i].atoms[m[i]];
        t.cost[idx] = cp_cost(tuple, weights, p, &t.bary[idx], opts.solver);
    });
    return t;
}

std::vector<Vec> TransportPlan::tuple(const std::vector<int>& index) const {
    std::vector<Vec> x(marginals.size());
    for (std::size_t i = 0; i < marginals.size(); ++i) x[i] = marginals[i].atoms[index[i]];
    return x;
}

void TransportPlan::write_csv(std::ostream& os) const {
    const int n = static_cast<int>(marginals.size());
    const int d = marginals.empty() ? 0 : marginals[0].dim();
    for (int i = 0; i < n; ++i) os << "i" << i + 1 << ",";
    os << "mass,cost";
    for (int k = 0; k < d; ++k) os << ",z" << k;
    os << "\n" << std::setprecision(17);
    for (const auto& e : entries) {
        for (int i = 0; i < n; ++i) os << e.index[i] << ",";
        os << e.mass << "," << e.cost;
        for (int k = 0; k < d; ++k) os << "," << e.bary(k);
        os << "\n";
    }
}

double marginal_residual(const TransportPlan& plan) {
    double worst = 0.0;
    for (std::size_t i = 0; i < plan.marginals.size(); ++i) {
        std::vector<double> sum(plan.marginals[i].size(), 0.0);
        for (const auto& e : plan.entries) sum[e.index[i]] += e.mass;
        for (std::size_t j = 0; j < sum.size(); ++j)
            worst = std::max(worst, std::abs(sum[j] - plan.marginals[i].masses[j]));
    }
    return worst;
}

TransportPlan solve_mmot(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights, double p,
                         const MmotOptions& opts) {
    return solve_mmot(cost_tensor(measures, weights, p, opts), measures, weights, p, opts);
}

TransportPlan solve_mmot(const CostTensor& tensor, const std::vector<DiscreteMeasure>& measures,
                         const std::vector<double>& weights, double p, const MmotOptions& opts) {
    const std::size_t n = measures.size();
    LinearProgram lp;
    std::vector<int> offset(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        offset[i] = lp.num_rows();
        for (double m : measures[i].masses) lp.add_row(RowSense::eq, m);
    }
    for (std::size_t idx = 0; idx < tensor.size(); ++idx) {
        int v = lp.add_variable(tensor.cost[idx]);
        auto m = tensor.unflatten(idx);
        for (std::size_t i = 0; i < n; ++i) lp.add_coeff(offset[i] + m[i], v, 1.0);
    }
    auto r = solve_lp(lp, opts.lp);
    if (r.status != LpStatus::optimal)
        throw ConvergenceError("multi-marginal LP ended with status " + to_string(r.status), Vec(), 0.0,
                               static_cast<int>(r.iterations));
    TransportPlan plan;
    plan.marginals = measures;
    plan.weights = weights;
    plan.p = p;
    for (std::size_t idx = 0; idx < tensor.size(); ++idx) {
        if (r.x[idx] <= 0.0) continue;
        plan.entries.push_back({tensor.unflatten(idx), r.x[idx], tensor.cost[idx], tensor.bary[idx]});
    }
    plan.objective = r.objective;
    plan.alternative_optima = r.alternative_optima;
    plan.iterations = r.iterations;
    plan.degenerate_pivots = r.degenerate_pivots;
    plan.marginal_residual = marginal_residual(plan);
    return plan;
}

double product_plan_cost(const CostTensor& tensor, const std::vector<DiscreteMeasure>& measures) {
    double s = 0.0;
    for (std::size_t idx = 0; idx < tensor.size(); ++idx) {
        auto m = tensor.unflatten(idx);
        double w = 1.0;
        for (std::size_t i = 0; i < measures.size(); ++i) w *= measures[i].masses[m[i]];
        s += w * tensor.cost[idx];
    }
    return s;
}

DiscreteMeasure barycenter_measure(const TransportPlan& plan, double merge_rel) {
    DiscreteMeasure raw;
    for (const auto& e : plan.entries) {
        raw.atoms.push_back(e.bary);
        raw.masses.push_back(e.mass);
    }
    return merge_atoms(raw, merge_rel * support_diameter(plan.marginals));
}

TwoMarginalResult ot_two_marginal(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                                  const MmotOptions& opts) {
    mu.validate("mu");
    nu.validate("nu");
    if (mu.dim() != nu.dim()) throw ValidationError("nu", "dimension mismatch");
    if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("p", "exponent must be at least 1");
    check_cap(static_cast<std::size_t>(mu.size()) * nu.size(), opts.cap, "two-marginal plan");
    LinearProgram lp;
    for (double m : mu.masses) lp.add_row(RowSense::eq, m);
    for (double m : nu.masses) lp.add_row(RowSense::eq, m);
    for (int j = 0; j < mu.size(); ++j)
        for (int k = 0; k < nu.size(); ++k) {
            int v = lp.add_variable(std::pow((mu.atoms[j] - nu.atoms[k]).norm(), p));
            lp.add_coeff(j, v, 1.0);
            lp.add_coeff(mu.size() + k, v, 1.0);
        }
    auto r = solve_lp(lp, opts.lp);
    if (r.status != LpStatus::optimal)
        throw ConvergenceError("two-marginal LP ended with status " + to_string(r.status), Vec(), 0.0,
                               static_cast<int>(r.iterations));
    TwoMarginalResult out;
    out.cost = r.objective;
    out.phi.assign(r.duals.begin(), r.duals.begin() + mu.size());
    out.psi.assign(r.duals.begin() + mu.size(), r.duals.end());
    out.alternative_optima = r.alternative_optima;
    for (int j = 0; j < mu.size(); ++j)
        for (int k = 0; k < nu.size(); ++k) {
            double m = r.x[j * nu.size() + k];
            if (m > 0.0) out.entries.push_back({{j, k}, m, lp.cost[j * nu.size() + k], Vec()});
        }
    return out;
}

double wp_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, const MmotOptions& opts) {
    return std::pow(std::max(ot_two_marginal(mu, nu, p, opts).cost, 0.0), 1.0 / p);
}

EquivalenceReport verify_c2m_equivalence(const std::vector<DiscreteMeasure>& measures,
                                         const std::vector<double>& weights, double p, const MmotOptions& opts) {
    EquivalenceReport rep;
    rep.plan = solve_mmot(measures, weights, p, opts);
    rep.nu = barycenter_measure(rep.plan);
    rep.c_mm = rep.plan.objective;
    for (std::size_t i = 0; i < measures.size(); ++i)
        rep.sum_wp += weights[i] * ot_two_marginal(measures[i], rep.nu, p, opts).cost;
    rep.gap = std::abs(rep.sum_wp - rep.c_mm);
    rep.tol = 1e-8 * (1.0 + rep.c_mm);
    rep.pass = rep.gap <= rep.tol;
    return rep;
}

MonotoneReport check_cp_monotone(const TransportPlan& plan, double tol) {
    MonotoneReport rep;
    const std::size_t n = plan.marginals.size();
    const std::size_t s = plan.entries.size();
    if (s < 2) return rep;
    const unsigned masks = 1u << n;
    std::vector<double> base(s);
    for (std::size_t a = 0; a < s; ++a) base[a] = cp_cost(plan.tuple(plan.entries[a].index), plan.weights, plan.p);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = a + 1; b < s; ++b) pairs.emplace_back(a, b);
    std::vector<double> worst(pairs.size(), 0.0);
    std::vector<unsigned> worst_mask(pairs.size(), 0);
    parallel_for(pairs.size(), [&](std::size_t k) {
        auto [a, b] = pairs[k];
        const auto& ia = plan.entries[a].index;
        const auto& ib = plan.entries[b].index;
        // masks containing marginal 0 duplicate their complements
        for (unsigned mask = 2; mask < masks; mask += 2) {
            std::vector<int> ja = ia, jb = ib;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (1u << i)) std::swap(ja[i], jb[i]);
            if (ja == ia || ja == ib) continue;
            double delta = cp_cost(plan.tuple(ja), plan.weights, plan.p) + cp_cost(plan.tuple(jb), plan.weights, plan.p) -
                           base[a] - base[b];
            if (delta < worst[k]) {
                worst[k] = delta;
                worst_mask[k] = mask;
            }
        }
    });
    rep.pairs = pairs.size();
    rep.swaps = pairs.size() * (masks / 2 - 1);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (worst[k] < rep.worst) {
            rep.worst = worst[k];
            rep.worst_a = pairs[k].first;
            rep.worst_b = pairs[k].second;
            rep.worst_mask = worst_mask[k];
        }
    }
    rep.pass = rep.worst >= -tol;
    return rep;
}

GraphReport check_graph_over_first(const TransportPlan& plan) {
    GraphReport rep;
    const auto& mu = plan.marginals.at(0);
    std::vector<int> count(mu.size(), 0);
    for (const auto& e : plan.entries) ++count[e.index[0]];
    for (int j = 0; j < mu.size(); ++j)
        if (mu.masses[j] > 0.0 && count[j] != 1) ++rep.multi_valued_atoms;
    rep.is_graph = rep.multi_valued_atoms == 0;
    rep.warning_only = !rep.is_graph && plan.alternative_optima;
    return rep;
}

DualCheckReport dual_check_potentials(const std::vector<DiscreteMeasure>& measures, const std::vector<double>& weights,
                                      double p, const MmotOptions& opts) {
    DualCheckReport rep;
    rep.nu = barycenter_measure(solve_mmot(measures, weights, p, opts));
    const auto& nu = rep.nu;
    const int n = static_cast<int>(measures.size());
    const int m = nu.size();
    for (int i = 0; i < n; ++i) {
        auto r = ot_two_marginal(measures[i], nu, p, opts);
        rep.wp.push_back(r.cost);
        rep.nonunique = rep.nonunique || r.alternative_optima;
    }

    // variables: phi_i (free), psi_i (free), lo, hi; minimize hi - lo over the optimal dual faces
    LinearProgram lp;
    std::vector<std::vector<int>> phi(n), psi(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < measures[i].size(); ++j) phi[i].push_back(lp.add_variable(0.0, true));
        for (int k = 0; k < m; ++k) psi[i].push_back(lp.add_variable(0.0, true));
    }
    int lo = lp.add_variable(-1.0, true), hi = lp.add_variable(1.0, true);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < measures[i].size(); ++j)
            for (int k = 0; k < m; ++k) {
                int row = lp.add_row(RowSense::le, std::pow((measures[i].atoms[j] - nu.atoms[k]).norm(), p));
                lp.add_coeff(row, phi[i][j], 1.0);
                lp.add_coeff(row, psi[i][k], 1.0);
            }
        int row = lp.add_row(RowSense::ge, rep.wp[i] - 1e-9 * (1.0 + rep.wp[i]));
        for (int j = 0; j < measures[i].size(); ++j) lp.add_coeff(row, phi[i][j], measures[i].masses[j]);
        for (int k = 0; k < m; ++k) lp.add_coeff(row, psi[i][k], nu.masses[k]);
    }
    for (int k = 0; k < m; ++k) {
        int up = lp.add_row(RowSense::le, 0.0), down = lp.add_row(RowSense::ge, 0.0);
        for (int i = 0; i < n; ++i) {
            lp.add_coeff(up, psi[i][k], weights[i]);
            lp.add_coeff(down, psi[i][k], weights[i]);
        }
        lp.add_coeff(up, hi, -1.0);
        lp.add_coeff(down, lo, -1.0);
    }
    auto r = solve_lp(lp, opts.lp);
    if (r.status != LpStatus::optimal)
        throw ConvergenceError("dual search LP ended with status " + to_string(r.status), Vec(), 0.0,
                               static_cast<int>(r.iterations));
    rep.phi.resize(n);
    rep.psi.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int v : phi[i]) rep.phi[i].push_back(r.x[v]);
        for (int v : psi[i]) rep.psi[i].push_back(r.x[v]);
    }
    rep.h.assign(m, 0.0);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < n; ++i) rep.h[k] += weights[i] * rep.psi[i][k];
    // shift (phi_1, psi_1) so that sum_i lambda_i psi_i vanishes at the first atom of nu
    double shift = rep.h[0] / weights[0];
    for (auto& v : rep.phi[0]) v += shift;
    for (auto& v : rep.psi[0]) v -= shift;
    double mean = 0.0;
    for (int k = 0; k < m; ++k) {
        rep.h[k] -= weights[0] * shift;
        mean += nu.masses[k] * rep.h[k];
    }
    double hmin = *std::min_element(rep.h.begin(), rep.h.end());
    double hmax = *std::max_element(rep.h.begin(), rep.h.end());
    rep.spread = hmax - hmin;
    for (int k = 0; k < m; ++k) rep.variance += nu.masses[k] * (rep.h[k] - mean) * (rep.h[k] - mean);
    double scale = 1.0;
    for (double w : rep.wp) scale = std::max(scale, w);
    rep.status = rep.spread <= 1e-6 * scale ? "exact" : "best_effort";
    return rep;
}

}  // namespace wbary
