#include "wbary/grid.hpp"

#include "wbary/error.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace wbary {

GridDensity::GridDensity(Vec lo_, Vec hi_, std::vector<int> res_)
    : lo(std::move(lo_)), hi(std::move(hi_)), res(std::move(res_)) {
    validate();
    values.assign(num_cells(), 0.0);
}

std::size_t GridDensity::num_cells() const {
    std::size_t n = 1;
    for (int r : res) n *= static_cast<std::size_t>(r);
    return n;
}

double GridDensity::cell_volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= cell_width(k);
    return v;
}

double GridDensity::pitch() const {
    double h = 0.0;
    for (int k = 0; k < dim(); ++k) h = std::max(h, cell_width(k));
    return h;
}

std::vector<int> GridDensity::unflatten(std::size_t idx) const {
    std::vector<int> m(dim());
    for (int k = dim() - 1; k >= 0; --k) {
        m[k] = static_cast<int>(idx % res[k]);
        idx /= res[k];
    }
    return m;
}

std::size_t GridDensity::flatten(const std::vector<int>& m) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim(); ++k) idx = idx * res[k] + m[k];
    return idx;
}

Vec GridDensity::center(std::size_t idx) const {
    auto m = unflatten(idx);
    Vec c(dim());
    for (int k = 0; k < dim(); ++k) c(k) = lo(k) + (m[k] + 0.5) * cell_width(k);
    return c;
}

long GridDensity::locate(const Vec& x) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim(); ++k) {
        double t = (x(k) - lo(k)) / cell_width(k);
        if (!(t >= 0.0) || t > res[k]) return -1;
        int i = std::min(static_cast<int>(t), res[k] - 1);
        idx = idx * res[k] + i;
    }
    return static_cast<long>(idx);
}

double GridDensity::value_at(const Vec& x) const {
    long i = locate(x);
    return i < 0 ? 0.0 : values[i];
}

double GridDensity::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_volume();
}

double GridDensity::lq_power(double q) const {
    double s = 0.0;
    for (double v : values) s += std::pow(std::abs(v), q);
    return s * cell_volume();
}

void GridDensity::normalize() {
    double m = mass();
    if (!(m > 0.0)) throw ValidationError("density", "density has zero mass");
    for (double& v : values) v /= m;
}

void GridDensity::validate(const std::string& field) const {
    if (lo.size() == 0 || lo.size() != hi.size()) throw ValidationError(field + ".box", "box bounds must have equal positive dimension");
    if (static_cast<int>(res.size()) != dim()) throw ValidationError(field + ".resolution", "one resolution per axis required");
    for (int k = 0; k < dim(); ++k) {
        if (!(hi(k) > lo(k))) throw ValidationError(field + ".box", "upper bound must exceed lower bound on axis " + std::to_string(k));
        if (res[k] < 1) throw ValidationError(field + ".resolution", "resolution must be positive");
    }
    if (!values.empty()) {
        if (values.size() != num_cells()) throw ValidationError(field + ".values", "value count does not match resolution");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(field + ".values", "values must be finite and nonnegative");
    }
}

GridDensity sample_density(const DensityFn& f, const Vec& lo, const Vec& hi, const std::vector<int>& res) {
    GridDensity g(lo, hi, res);
    for (std::size_t i = 0; i < g.num_cells(); ++i) g.values[i] = f(g.center(i));
    return g;
}

GridDensity uniform_ball_density(const Vec& center, double radius, const Vec& lo, const Vec& hi,
                                 const std::vector<int>& res) {
    if (!(radius > 0.0)) throw ValidationError("radius", "radius must be positive");
    GridDensity g = sample_density([&](const Vec& x) { return (x - center).norm() <= radius ? 1.0 : 0.0; }, lo, hi, res);
    g.normalize();
    return g;
}

double unit_volume_ball_radius(int d) {
    // volume of the unit ball: pi^{d/2} / Gamma(d/2 + 1)
    double omega = std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
    return std::pow(1.0 / omega, 1.0 / d);
}

void write_grid_csv(std::ostream& os, const GridDensity& g) {
    for (int k = 0; k < g.dim(); ++k) os << "x" << k << ",";
    os << "value\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < g.num_cells(); ++i) {
        Vec c = g.center(i);
        for (int k = 0; k < g.dim(); ++k) os << c(k) << ",";
        os << g.values[i] << "\n";
    }
}

}  // namespace wbary
