#pragma once

#include <Eigen/Dense>
#include <vector>

namespace wbary {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// alpha_p = (p-2)/(p-1).
double alpha_p(double p);

bool is_p_two(double p);

double diameter(const std::vector<Vec>& points);

// N points with positive weights and an exponent p > 1.
struct WeightedPointConfig {
    std::vector<Vec> points;
    std::vector<double> weights;
    double p = 2.0;

    int size() const { return static_cast<int>(points.size()); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
    // Throws ValidationError.
    void validate() const;
};

struct SolverOptions {
    double tol = 1e-12;
    int max_iterations = 200;
    double coincidence_eps = 1e-9;  // relative to diam
};

struct BarycenterSolution {
    Vec z;
    double residual_norm = 0.0;
    std::vector<int> coincident_set;  // 0-based indices
    int iterations = 0;
    // Some |x_i - z| lies within a factor 10 of the coincidence threshold.
    bool borderline = false;
};

// sum_i lambda_i |x_i - z|^p
double pbary_objective(const WeightedPointConfig& cfg, const Vec& z);

// sum_i lambda_i |x_i - z|^{p-2} (x_i - z), with a zero summand when x_i = z.
Vec el_residual(const WeightedPointConfig& cfg, const Vec& z);

// max_i lambda_i * diam^{p-1}; the residual tolerance is relative to this.
double residual_scale(const WeightedPointConfig& cfg);

BarycenterSolution pbary_solve(const WeightedPointConfig& cfg, const SolverOptions& opts = {});

// Indices with |x_i - z| <= eps * diam.
std::vector<int> coincident_indices(const WeightedPointConfig& cfg, const Vec& z, double eps = 1e-9);

struct CurvatureBlocks {
    std::vector<Mat> H;
    Mat Hbar;
    std::vector<double> Lambda;
    // For 1 < p < 2, blocks with x_i = z are unbounded. They are marked here,
    // H[i] is left as zero, Lambda[i] = +inf, Lambda of regular blocks is 0 and
    // Hbar is filled with +inf.
    std::vector<bool> singular;
    bool has_singular() const;
};

// Throws DegenerateError if Hbar is singular.
CurvatureBlocks curvature_blocks(const WeightedPointConfig& cfg, const Vec& z, double eps = 1e-9);

// Hbar^{-1} H_i. Throws DegenerateError on the full diagonal and DomainError
// when block i is singular.
Mat dbary_dxi(const WeightedPointConfig& cfg, const Vec& z, int i, double eps = 1e-9);

// Minimum eigenvalue of a symmetric matrix (symmetrized first).
double min_sym_eigenvalue(const Mat& m);
double max_sym_eigenvalue(const Mat& m);

}  // namespace wbary
