#include "support.hpp"
#include "wbary/error.hpp"
#include "wbary/semidiscrete.hpp"

#include <doctest.h>

#include <cmath>

using namespace wbary;
using testsupport::vec;

namespace {

DiracConfiguration line_cfg() {
    DiracConfiguration c;
    c.p = 3.0;
    c.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    c.anchors = {vec({1.0}), vec({2.0})};
    return c;
}

DiracConfiguration random_cfg(std::mt19937_64& rng, int n, int d, double p) {
    DiracConfiguration c;
    c.p = p;
    c.weights = testsupport::random_weights(rng, n);
    for (int i = 1; i < n; ++i) c.anchors.push_back(testsupport::random_vec(rng, d));
    return c;
}

// Smooth bump of unit mass supported on the disk of radius rho.
DensityFn bump(const Vec& c, double rho) {
    double norm = 1.0 / (2.0 * M_PI * rho * rho * (0.25 - 1.0 / (M_PI * M_PI)));
    return [c, rho, norm](const Vec& x) {
        double r = (x - c).norm();
        if (r >= rho) return 0.0;
        double t = std::cos(M_PI * r / (2.0 * rho));
        return norm * t * t;
    };
}

Mat fd_jacobian(const SemidiscreteMap& m, const Vec& z, double h) {
    const int d = static_cast<int>(z.size());
    Mat j(d, d);
    for (int k = 0; k < d; ++k) {
        Vec zp = z, zm = z;
        zp(k) += h;
        zm(k) -= h;
        j.col(k) = (m.inverse(zp) - m.inverse(zm)) / (2 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("reduced field examples") {
    auto c = line_cfg();
    SemidiscreteMap m(c);
    CHECK(m.gbar(vec({0.0}))(0) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(m.gbar(m.fixed_point()).norm() <= 1e-12);
    DiracConfiguration two;
    two.p = 2.5;
    two.weights = {0.4, 0.6};
    two.anchors = {vec({1.0, -2.0})};
    SemidiscreteMap m2(two);
    Vec z = vec({0.3, 0.7});
    Vec w = two.anchors[0] - z;
    CHECK((m2.gbar(z) - 0.6 * std::pow(w.norm(), 0.5) * w).norm() < 1e-15);
}

TEST_CASE("explicit inverse and its gradient in d=1") {
    auto c = line_cfg();
    SemidiscreteMap m(c);
    double x = m.inverse(vec({0.0}))(0);
    CHECK(x == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-14));
    // bisection on the forward map as an independent oracle
    double lo = -5.0, hi = 0.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (m.forward(vec({mid}))(0) < 0.0 ? lo : hi) = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-10));
    Mat g = m.grad_inverse(vec({0.0}));
    CHECK(g(0, 0) == doctest::Approx(1.0 + 3.0 / std::sqrt(5.0)).epsilon(1e-14));
    CHECK(fd_jacobian(m, vec({0.0}), 1e-5)(0, 0) == doctest::Approx(g(0, 0)).epsilon(1e-8));
    CHECK((m.inverse(m.fixed_point()) - m.fixed_point()).norm() == 0.0);
    CHECK((m.forward(m.fixed_point()) - m.fixed_point()).norm() < 1e-12);
}

TEST_CASE("free-function wrappers") {
    auto c = line_cfg();
    CHECK(gbar(c, vec({0.0}))(0) == doctest::Approx(5.0 / 3.0));
    CHECK(b_inverse(c, vec({0.0}))(0) == doctest::Approx(-std::sqrt(5.0)));
    CHECK(grad_b_inverse(c, vec({0.0}))(0, 0) == doctest::Approx(1.0 + 3.0 / std::sqrt(5.0)));
    CHECK(b_forward(c, vec({-std::sqrt(5.0)}))(0) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("singular points raise domain errors") {
    auto c = line_cfg();
    SemidiscreteMap m(c);
    CHECK_THROWS_AS(m.grad_inverse(m.fixed_point()), DomainError);
    c.p = 1.5;
    SemidiscreteMap m2(c);
    CHECK_THROWS_AS(m2.grad_inverse(vec({1.0})), DomainError);
    // for p < 2 the fixed point is regular
    CHECK((m2.grad_inverse(m2.fixed_point()) - Mat::Identity(1, 1)).norm() == 0.0);
    CHECK(m2.singular_points().size() == 2);
}

TEST_CASE("N=2 closed forms") {
    for (double p : {1.5, 2.0, 3.0}) {
        DiracConfiguration c;
        c.p = p;
        c.weights = {0.3, 0.7};
        c.anchors = {vec({1.0, 2.0})};
        SemidiscreteMap m(c);
        double a = 1.0 / (p - 1.0);
        double w1 = std::pow(0.3, a), w2 = std::pow(0.7, a);
        Vec x = vec({-0.4, 0.9});
        Vec expected = (w1 * x + w2 * c.anchors[0]) / (w1 + w2);
        CHECK((m.forward(x) - expected).norm() < 1e-14);
        Mat g = m.grad_inverse(vec({0.2, -0.3}));
        CHECK((g - ((w1 + w2) / w1) * Mat::Identity(2, 2)).norm() < 1e-12);
        if (p < 2.0) {
            auto r = check_bounds_p_lt2(m, vec({0.2, -0.3}));
            CHECK(r.lower_margin >= -1e-9);
            CHECK(r.upper_margin >= -1e-9);
        }
    }
}

TEST_CASE("round trips, moduli identity and finite differences") {
    std::mt19937_64 rng(5);
    for (double p : {1.3, 1.7, 2.0, 2.5, 3.0, 4.5}) {
        for (int t = 0; t < 10; ++t) {
            int d = 1 + t % 3;
            auto c = random_cfg(rng, 3 + t % 2, d, p);
            SemidiscreteMap m(c);
            for (int k = 0; k < 10; ++k) {
                Vec z = testsupport::random_vec(rng, d, 2.0);
                Vec x = m.inverse(z);
                CHECK((m.forward(x) - z).norm() < 1e-8);
                Vec x1 = testsupport::random_vec(rng, d, 2.0);
                Vec b = m.forward(x1);
                CHECK((m.inverse(b) - x1).norm() < 1e-8);
                double lhs = c.lambda1() * std::pow((x1 - b).norm(), p - 1.0);
                double rhs = m.gbar(b).norm();
                CHECK(std::abs(lhs - rhs) <= 1e-7 * rhs + 1e-12);
                Mat g = m.grad_inverse(z);
                Mat fd = fd_jacobian(m, z, 1e-5 * std::max(1.0, m.anchor_diameter()));
                CHECK((fd - g).norm() <= 1e-5 * g.norm());
                if (p >= 2.0) CHECK(g.determinant() >= 1.0 - 1e-9);
            }
        }
    }
}

TEST_CASE("bounds for p >= 2") {
    std::mt19937_64 rng(9);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        auto c = random_cfg(rng, 4, 2, p);
        SemidiscreteMap m(c);
        for (int k = 0; k < 200; ++k) {
            Vec z = testsupport::random_vec(rng, 2, 2.0);
            auto r = check_bounds_p_ge2(m, z);
            CHECK(r.lower_margin >= -1e-9);
            CHECK(r.explicit_lower_margin >= -1e-9 * r.explicit_lower);
            CHECK(r.explicit_upper_margin >= -1e-9 * r.explicit_upper);
            if (is_p_two(p)) CHECK(std::abs(r.max_eig - 1.0 / c.lambda1()) < 1e-12);
        }
    }
    // approach to the fixed point: the scaled eigenvalues stay in a fixed band
    DiracConfiguration c;
    c.p = 3.0;
    c.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    c.anchors = {vec({1.0, 0.0}), vec({-1.0, 0.0})};
    SemidiscreteMap m(c);
    double lo = 1e300, hi = 0.0;
    for (int k = 1; k <= 20; ++k) {
        for (double ang : {0.3, 1.2, 2.5}) {
            Vec z = m.fixed_point() + std::pow(2.0, -k) * vec({std::cos(ang), std::sin(ang)});
            auto r = check_bounds_p_ge2(m, z);
            lo = std::min(lo, r.scaled_min);
            hi = std::max(hi, r.scaled_max);
        }
    }
    CHECK(lo > 0.0);
    CHECK(hi / lo < 10.0);
}

TEST_CASE("bounds for 1 < p < 2") {
    std::mt19937_64 rng(13);
    for (double p : {1.2, 1.5, 1.8}) {
        for (int t = 0; t < 5; ++t) {
            auto c = random_cfg(rng, 3 + t % 2, 2, p);
            SemidiscreteMap m(c);
            for (int k = 0; k < 100; ++k) {
                Vec z = testsupport::random_vec(rng, 2, 2.0);
                auto r = check_bounds_p_lt2(m, z);
                CHECK(r.upper_margin >= -1e-9);
                CHECK(r.explicit_lower_margin >= -1e-9 * std::max(1.0, r.explicit_lower));
                CHECK(r.explicit_upper_margin >= -1e-9 * std::max(1.0, r.explicit_upper));
            }
        }
    }
    // growth near an anchor: eig(grad b^{-1} - Id) ~ |z - x̂_i|^{-(2-p)}
    DiracConfiguration c;
    c.p = 1.5;
    c.weights = {0.5, 0.25, 0.25};
    c.anchors = {vec({-0.2, 0.0}), vec({0.2, 0.0})};
    SemidiscreteMap m(c);
    std::vector<double> xs, ys;
    for (int k = 20; k <= 40; ++k) {
        double r = std::pow(2.0, -k);
        auto rep = check_bounds_p_lt2(m, c.anchors[0] + r * vec({0.6, 0.8}));
        xs.push_back(std::log(r));
        ys.push_back(std::log(rep.max_eig));
    }
    double n = xs.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i], sxx += xs[i] * xs[i], sxy += xs[i] * ys[i];
    double slope = (sxy - sx * sy / n) / (sxx - sx * sx / n);
    CHECK(std::abs(slope + 0.5) <= 0.05);
}

TEST_CASE("pushforward for p=2 and N=2") {
    Vec lo = vec({-1.0, -1.0}), hi = vec({1.0, 1.0});
    GridDensity f1 = sample_density(bump(vec({0.1, 0.0}), 0.8), lo, hi, {96, 96});
    f1.normalize();
    // p=2: b^{-1}(z) = (z - (1 - lambda_1) x̄)/lambda_1 and J = lambda_1^{-d}
    DiracConfiguration c;
    c.p = 2.0;
    c.weights = {0.5, 0.2, 0.3};
    c.anchors = {vec({2.0, 0.0}), vec({2.0, 1.0})};
    SemidiscreteMap m(c);
    PushforwardOptions o;
    o.res = {80, 80};
    auto pf = pushforward_density(m, f1, o);
    CHECK(!pf.coarse_warning);
    CHECK(pf.mass_error < 3e-2);
    for (std::size_t i = 0; i < pf.g.num_cells(); i += 37) {
        Vec z = pf.g.center(i);
        Vec x = (z - 0.5 * m.fixed_point()) / 0.5;
        CHECK(pf.g.values[i] == doctest::Approx(4.0 * f1.value_at(x)).epsilon(1e-9));
    }
    // N=2: constant Jacobian ((w1 + w2)/w1)^d
    DiracConfiguration c2;
    c2.p = 3.0;
    c2.weights = {0.25, 0.75};
    c2.anchors = {vec({3.0, -1.0})};
    SemidiscreteMap m2(c2);
    auto pf2 = pushforward_density(m2, f1, o);
    double w1 = std::sqrt(0.25), w2 = std::sqrt(0.75);
    double jac = std::pow((w1 + w2) / w1, 2.0);
    for (std::size_t i = 0; i < pf2.g.num_cells(); i += 41) {
        Vec z = pf2.g.center(i);
        CHECK(pf2.g.values[i] == doctest::Approx(jac * f1.value_at(m2.inverse(z))).epsilon(1e-9));
    }
}

TEST_CASE("pushforward mass converges under refinement") {
    DiracConfiguration c;
    c.p = 3.0;
    c.weights = {0.4, 0.3, 0.3};
    c.anchors = {vec({-0.5, 0.0}), vec({0.5, 0.2})};
    SemidiscreteMap m(c);
    auto f = bump(m.fixed_point(), 0.6);
    Vec lo = m.fixed_point() - vec({0.6, 0.6}), hi = m.fixed_point() + vec({0.6, 0.6});
    double prev = 1.0;
    for (int res : {32, 64, 128}) {
        PushforwardOptions o;
        o.res = {res, res};
        auto pf = pushforward_density(m, f, lo, hi, o);
        CHECK(pf.refined_cells > 0);
        MESSAGE("res " << res << " mass error " << pf.mass_error);
        CHECK(pf.mass_error <= 0.5 * prev);
        prev = pf.mass_error;
    }
}

TEST_CASE("L^q routes agree") {
    DiracConfiguration c;
    c.p = 2.5;
    c.weights = {0.5, 0.25, 0.25};
    c.anchors = {vec({-1.5, 0.0}), vec({1.5, 0.5})};
    SemidiscreteMap m(c);
    Vec lo = vec({-0.8, -0.8}), hi = vec({0.8, 0.8});
    GridDensity f1 = sample_density(bump(vec({0.0, 0.0}), 0.8), lo, hi, {128, 128});
    f1.normalize();
    PushforwardOptions o;
    o.res = {160, 160};
    auto pf = pushforward_density(m, f1, o);
    auto one = lq_via_changevar(m, f1, 1.0);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pf.g.lq_power(1.0) == doctest::Approx(1.0).epsilon(1e-2));
    for (double q : {1.5, 2.0}) {
        auto cv = lq_via_changevar(m, f1, q);
        double grid = pf.g.lq_power(q);
        CHECK(cv.finite);
        CHECK(grid == doctest::Approx(cv.value).epsilon(0.03));
    }
    CHECK(lq_norm(pf.g, 2.0) == doctest::Approx(std::sqrt(pf.g.lq_power(2.0))));
}

TEST_CASE("blow-up exponent fits") {
    double rad = unit_volume_ball_radius(2);
    DensityFn ball = [rad](const Vec& x) { return x.norm() <= rad ? 1.0 : 0.0; };
    DiracConfiguration c;
    c.p = 3.0;
    c.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    c.anchors = {vec({-0.5, 0.0}), vec({0.5, 0.0})};
    SemidiscreteMap m(c);
    std::vector<double> radii;
    for (int k = 16; k <= 36; ++k) radii.push_back(std::pow(2.0, -k));
    auto fit = blowup_exponent(m, ball, m.fixed_point(), radii, {1.5, 2.5});
    CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.02));
    CHECK(fit.verdicts[0].second == Verdict::integrable);
    CHECK(fit.verdicts[1].second == Verdict::not_integrable);
    c.p = 2.0;
    SemidiscreteMap m2(c);
    auto fit2 = blowup_exponent(m2, ball, m2.fixed_point(), radii, {1.5, 10.0});
    CHECK(std::abs(fit2.slope) < 1e-9);
    CHECK(fit2.verdicts[1].second == Verdict::integrable);
    CHECK_THROWS_AS(blowup_exponent(m, ball, m.fixed_point(), {1e-3, 1e-4, 1e-5}, {2.0}), InsufficientDataError);
    // annuli outside the support are unusable
    CHECK_THROWS_AS(blowup_exponent(m, ball, vec({5.0, 5.0}), radii, {2.0}), InsufficientDataError);
}

TEST_CASE("grid density basics") {
    GridDensity g(vec({0.0, 0.0}), vec({2.0, 1.0}), {4, 2});
    CHECK(g.num_cells() == 8);
    CHECK(g.cell_volume() == doctest::Approx(0.25));
    CHECK(g.locate(vec({1.9, 0.9})) == 7);
    CHECK(g.locate(vec({2.1, 0.5})) == -1);
    CHECK((g.center(5) - vec({1.25, 0.75})).norm() < 1e-15);
    auto ball = uniform_ball_density(vec({0.0, 0.0}), 1.0, vec({-1.0, -1.0}), vec({1.0, 1.0}), {64, 64});
    CHECK(ball.mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(unit_volume_ball_radius(2) == doctest::Approx(1.0 / std::sqrt(M_PI)));
    GridDensity bad(vec({0.0}), vec({1.0}), {2});
    bad.values = {1.0, -1.0};
    CHECK_THROWS_AS(bad.validate("f1"), ValidationError);
}
