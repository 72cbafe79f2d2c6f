#pragma once

#include "wbary/barycenter.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace wbary {

// Cell-centered density on an axis-aligned box. Cells are stored with the
// first axis varying slowest.
struct GridDensity {
    Vec lo, hi;
    std::vector<int> res;
    std::vector<double> values;

    GridDensity() = default;
    GridDensity(Vec lo, Vec hi, std::vector<int> res);

    int dim() const { return static_cast<int>(lo.size()); }
    std::size_t num_cells() const;
    double cell_width(int axis) const { return (hi(axis) - lo(axis)) / res[axis]; }
    double cell_volume() const;
    double pitch() const;  // largest cell width
    std::vector<int> unflatten(std::size_t idx) const;
    std::size_t flatten(const std::vector<int>& multi) const;
    Vec center(std::size_t idx) const;
    // Cell index containing x, or -1 if outside the box.
    long locate(const Vec& x) const;
    // Piecewise-constant lookup, 0 outside the box.
    double value_at(const Vec& x) const;
    double mass() const;
    double lq_power(double q) const;  // integral of |value|^q
    void normalize();
    // Throws ValidationError naming `field`.
    void validate(const std::string& field = "grid") const;
};

using DensityFn = std::function<double(const Vec&)>;

// Samples f at cell centers.
GridDensity sample_density(const DensityFn& f, const Vec& lo, const Vec& hi, const std::vector<int>& res);

// Indicator of a ball discretized by cell-center inclusion, renormalized to mass 1.
GridDensity uniform_ball_density(const Vec& center, double radius, const Vec& lo, const Vec& hi,
                                 const std::vector<int>& res);

// Radius of the ball of unit volume in dimension d.
double unit_volume_ball_radius(int d);

void write_grid_csv(std::ostream& os, const GridDensity& g);

}  // namespace wbary
