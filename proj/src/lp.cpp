#include "wbary/lp.hpp"

#include "wbary/error.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace wbary {

int LinearProgram::add_variable(double c, bool free) {
    cost.push_back(c);
    is_free.push_back(free);
    columns.emplace_back();
    return num_variables() - 1;
}

int LinearProgram::add_row(RowSense s, double b) {
    sense.push_back(s);
    rhs.push_back(b);
    return num_rows() - 1;
}

void LinearProgram::add_coeff(int row, int var, double value) {
    if (row < 0 || row >= num_rows() || var < 0 || var >= num_variables())
        throw ValidationError("lp", "coefficient index out of range");
    if (value != 0.0) columns[var].emplace_back(row, value);
}

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

using Column = std::vector<std::pair<int, double>>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPivotTol = 1e-9;

struct Simplex {
    int m = 0;
    std::vector<Column> col;
    std::vector<double> c;
    VectorXd b;
    std::vector<int> basis, pos;
    std::vector<char> excluded;
    MatrixXd binv;
    VectorXd xb;
    double tol = 1e-9;
    long iterations = 0, degenerate = 0;
    int refactor_interval = 64, since_refactor = 0;

    int num_cols() const { return static_cast<int>(col.size()); }

    void refactor() {
        MatrixXd bm = MatrixXd::Zero(m, m);
        for (int r = 0; r < m; ++r)
            for (auto [row, v] : col[basis[r]]) bm(row, r) = v;
        Eigen::PartialPivLU<MatrixXd> lu(bm);
        binv = lu.inverse();
        xb = binv * b;
        for (int r = 0; r < m; ++r)
            if (xb(r) < 0.0 && xb(r) > -tol) xb(r) = 0.0;
        since_refactor = 0;
    }

    VectorXd duals() const {
        VectorXd cb(m);
        for (int r = 0; r < m; ++r) cb(r) = c[basis[r]];
        return binv.transpose() * cb;
    }

    double reduced(int j, const VectorXd& y) const {
        double d = c[j];
        for (auto [row, v] : col[j]) d -= y(row) * v;
        return d;
    }

    VectorXd ftran(int j) const {
        VectorXd a = VectorXd::Zero(m);
        for (auto [row, v] : col[j]) a += v * binv.col(row);
        return a;
    }

    void pivot(int r, int enter, const VectorXd& alpha) {
        double ar = alpha(r);
        double theta = xb(r) / ar;
        if (std::abs(theta) <= tol) ++degenerate;
        xb -= theta * alpha;
        xb(r) = theta;
        binv.row(r) /= ar;
        VectorXd a = alpha;
        a(r) = 0.0;
        binv.noalias() -= a * binv.row(r);
        pos[basis[r]] = -1;
        basis[r] = enter;
        pos[enter] = r;
        for (int i = 0; i < m; ++i)
            if (xb(i) < 0.0 && xb(i) > -tol) xb(i) = 0.0;
        ++iterations;
        if (++since_refactor >= refactor_interval) refactor();
    }

    LpStatus run(long max_iterations) {
        const int n = num_cols();
        while (true) {
            if (iterations >= max_iterations) return LpStatus::iteration_limit;
            VectorXd y = duals();
            int enter = -1;
            for (int j = 0; j < n; ++j) {
                if (pos[j] >= 0 || excluded[j]) continue;
                if (reduced(j, y) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::optimal;
            VectorXd alpha = ftran(enter);
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m; ++r)
                if (alpha(r) > kPivotTol) best = std::min(best, std::max(xb(r), 0.0) / alpha(r));
            int leave = -1;
            for (int r = 0; r < m; ++r) {
                if (alpha(r) <= kPivotTol) continue;
                double t = std::max(xb(r), 0.0) / alpha(r);
                if (t <= best + 1e-12 * (1.0 + best) && (leave < 0 || basis[r] < basis[leave])) leave = r;
            }
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter, alpha);
        }
    }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts) {
    const int m = lp.num_rows();
    const int nv = lp.num_variables();
    LpResult res;
    res.x.assign(nv, 0.0);
    res.duals.assign(m, 0.0);
    if (m == 0) {
        for (int j = 0; j < nv; ++j)
            if (lp.cost[j] < 0.0 || (lp.is_free[j] && lp.cost[j] != 0.0)) {
                res.status = LpStatus::unbounded;
                return res;
            }
        res.status = LpStatus::optimal;
        return res;
    }

    double cscale = 0.0, bscale = 0.0;
    for (double v : lp.cost) cscale = std::max(cscale, std::abs(v));
    for (double v : lp.rhs) bscale = std::max(bscale, std::abs(v));
    if (cscale == 0.0) cscale = 1.0;
    if (bscale == 0.0) bscale = 1.0;

    Simplex s;
    s.m = m;
    s.tol = opts.tol;
    s.refactor_interval = opts.refactor_interval;
    std::vector<double> sign(m);
    s.b.resize(m);
    for (int i = 0; i < m; ++i) {
        sign[i] = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
        s.b(i) = sign[i] * lp.rhs[i] / bscale;
    }

    // structural columns (free variables split into a +/- pair)
    std::vector<int> plus(nv), minus(nv, -1);
    for (int j = 0; j < nv; ++j) {
        Column cj;
        for (auto [row, v] : lp.columns[j]) cj.emplace_back(row, sign[row] * v);
        plus[j] = s.num_cols();
        s.col.push_back(cj);
        s.c.push_back(lp.cost[j] / cscale);
        if (lp.is_free[j]) {
            for (auto& e : cj) e.second = -e.second;
            minus[j] = s.num_cols();
            s.col.push_back(cj);
            s.c.push_back(-lp.cost[j] / cscale);
        }
    }
    const int nstruct = s.num_cols();
    std::vector<int> owner(nstruct), partner(nstruct, -1);
    for (int j = 0; j < nv; ++j) {
        owner[plus[j]] = j;
        if (minus[j] >= 0) {
            owner[minus[j]] = j;
            partner[plus[j]] = minus[j];
            partner[minus[j]] = plus[j];
        }
    }
    std::vector<int> start(m, -1);
    for (int i = 0; i < m; ++i) {
        if (lp.sense[i] == RowSense::eq) continue;
        double v = (lp.sense[i] == RowSense::le ? 1.0 : -1.0) * sign[i];
        s.col.push_back({{i, v}});
        s.c.push_back(0.0);
        if (v > 0.0) start[i] = s.num_cols() - 1;
    }
    const int nreal = s.num_cols();
    for (int i = 0; i < m; ++i) {
        if (start[i] >= 0) continue;
        s.col.push_back({{i, 1.0}});
        s.c.push_back(0.0);
        start[i] = s.num_cols() - 1;
    }
    const int ntotal = s.num_cols();
    s.pos.assign(ntotal, -1);
    s.excluded.assign(ntotal, 0);
    s.basis = start;
    for (int r = 0; r < m; ++r) s.pos[start[r]] = r;

    // phase I
    std::vector<double> phase2 = s.c;
    bool has_artificial = ntotal > nreal;
    if (has_artificial) {
        for (int j = 0; j < ntotal; ++j) s.c[j] = j >= nreal ? 1.0 : 0.0;
        s.refactor();
        LpStatus st = s.run(opts.max_iterations);
        if (st == LpStatus::iteration_limit) {
            res.status = st;
            res.iterations = s.iterations;
            return res;
        }
        s.refactor();
        double infeas = 0.0;
        for (int r = 0; r < m; ++r)
            if (s.basis[r] >= nreal) infeas += std::max(s.xb(r), 0.0);
        if (infeas > 1e-7) {
            res.status = LpStatus::infeasible;
            res.iterations = s.iterations;
            return res;
        }
        // drive zero-level artificials out of the basis; rows where this fails are redundant
        for (int r = 0; r < m; ++r) {
            if (s.basis[r] < nreal) continue;
            for (int j = 0; j < nreal; ++j) {
                if (s.pos[j] >= 0) continue;
                double v = 0.0;
                for (auto [row, a] : s.col[j]) v += s.binv(r, row) * a;
                if (std::abs(v) > 1e-7) {
                    s.xb(r) = 0.0;
                    s.pivot(r, j, s.ftran(j));
                    break;
                }
            }
        }
        for (int j = nreal; j < ntotal; ++j) s.excluded[j] = 1;
    } else {
        s.refactor();
    }

    // phase II
    s.c = phase2;
    for (int j = nreal; j < ntotal; ++j) s.c[j] = 0.0;
    s.refactor();
    res.status = s.run(opts.max_iterations);
    s.refactor();
    res.iterations = s.iterations;
    res.degenerate_pivots = s.degenerate;

    std::vector<double> xs(ntotal, 0.0);
    for (int r = 0; r < m; ++r) xs[s.basis[r]] = std::max(s.xb(r), 0.0) * bscale;
    for (int j = 0; j < nv; ++j) {
        res.x[j] = xs[plus[j]];
        if (minus[j] >= 0) res.x[j] -= xs[minus[j]];
    }
    res.objective = 0.0;
    for (int j = 0; j < nv; ++j) res.objective += lp.cost[j] * res.x[j];
    VectorXd y = s.duals();
    for (int i = 0; i < m; ++i) res.duals[i] = sign[i] * y(i) * cscale;
    for (int r = 0; r < m; ++r)
        if (s.basis[r] < nstruct) res.basic.push_back(owner[s.basis[r]]);
    std::sort(res.basic.begin(), res.basic.end());
    if (res.status == LpStatus::optimal) {
        for (int j = 0; j < nreal; ++j) {
            if (s.pos[j] >= 0) continue;
            bool split_partner = j < nstruct && partner[j] >= 0 && s.pos[partner[j]] >= 0;
            if (!split_partner && std::abs(s.reduced(j, y)) <= s.tol) {
                res.alternative_optima = true;
                break;
            }
        }
    }
    return res;
}

}  // namespace wbary
