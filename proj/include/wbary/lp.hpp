#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace wbary {

enum class RowSense { eq, le, ge };

// min c^T x subject to row constraints; variables are >= 0 unless marked free.
struct LinearProgram {
    std::vector<double> cost;
    std::vector<bool> is_free;
    std::vector<std::vector<std::pair<int, double>>> columns;  // (row, coefficient) per variable
    std::vector<RowSense> sense;
    std::vector<double> rhs;

    int add_variable(double c, bool free = false);
    int add_row(RowSense s, double b);
    void add_coeff(int row, int var, double value);
    int num_variables() const { return static_cast<int>(cost.size()); }
    int num_rows() const { return static_cast<int>(rhs.size()); }
};

struct LpOptions {
    double tol = 1e-9;  // feasibility and optimality, relative to max|b| and max|c|
    long max_iterations = 5'000'000;
    int refactor_interval = 64;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };
std::string to_string(LpStatus s);

struct LpResult {
    LpStatus status = LpStatus::iteration_limit;
    double objective = 0.0;
    std::vector<double> x;
    // Row duals y with c_j - sum_r y_r a_rj >= 0 at optimality (for nonnegative variables).
    std::vector<double> duals;
    std::vector<int> basic;  // structural variables in the final basis
    long iterations = 0;
    long degenerate_pivots = 0;
    // A nonbasic structural variable has zero reduced cost: the optimum may not be unique.
    bool alternative_optima = false;
};

// Two-phase revised primal simplex with Bland's rule.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

}  // namespace wbary
