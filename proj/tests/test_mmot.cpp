#include "support.hpp"
#include "wbary/error.hpp"
#include "wbary/mmot.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace wbary;
using testsupport::vec;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, int k, int d, double scale = 1.0) {
    DiscreteMeasure mu;
    mu.masses = testsupport::random_weights(rng, k);
    for (int j = 0; j < k; ++j) mu.atoms.push_back(testsupport::random_vec(rng, d, scale));
    return mu;
}

DiscreteMeasure line_measure(std::vector<double> xs, std::vector<double> ms) {
    DiscreteMeasure mu;
    for (double x : xs) mu.atoms.push_back(vec({x}));
    mu.masses = std::move(ms);
    return mu;
}

// Minimum of the cost over all vertices of the transportation polytope, by enumerating column subsets.
double vertex_enumeration(const CostTensor& t, const std::vector<DiscreteMeasure>& ms) {
    const int n = static_cast<int>(ms.size());
    int rows = 0;
    for (const auto& mu : ms) rows += mu.size();
    const int cols = static_cast<int>(t.size());
    Mat a = Mat::Zero(rows, cols);
    Vec b(rows);
    int off = 0;
    std::vector<int> offset(n);
    for (int i = 0; i < n; ++i) {
        offset[i] = off;
        for (int j = 0; j < ms[i].size(); ++j) b(off + j) = ms[i].masses[j];
        off += ms[i].size();
    }
    for (int c = 0; c < cols; ++c) {
        auto m = t.unflatten(c);
        for (int i = 0; i < n; ++i) a(offset[i] + m[i], c) = 1.0;
    }
    const int rank = rows - n + 1;
    double best = 1e300;
    std::vector<bool> sel(cols, false);
    std::fill(sel.begin(), sel.begin() + rank, true);
    do {
        Mat as(rows, rank);
        std::vector<int> idx;
        for (int c = 0; c < cols; ++c)
            if (sel[c]) {
                as.col(static_cast<int>(idx.size())) = a.col(c);
                idx.push_back(c);
            }
        Eigen::ColPivHouseholderQR<Mat> qr(as);
        if (qr.rank() < rank) continue;
        Vec x = qr.solve(b);
        if ((as * x - b).norm() > 1e-10 || x.minCoeff() < -1e-12) continue;
        double v = 0.0;
        for (int k = 0; k < rank; ++k) v += x(k) * t.cost[idx[k]];
        best = std::min(best, v);
    } while (std::prev_permutation(sel.begin(), sel.end()));
    return best;
}

// North-west corner rule on sorted atoms: the optimal coupling in d=1 for convex costs.
double monotone_cost(DiscreteMeasure mu, DiscreteMeasure nu, double p) {
    auto sort = [](DiscreteMeasure& m) {
        std::vector<int> o(m.size());
        std::iota(o.begin(), o.end(), 0);
        std::sort(o.begin(), o.end(), [&](int a, int b) { return m.atoms[a](0) < m.atoms[b](0); });
        DiscreteMeasure s;
        for (int j : o) {
            s.atoms.push_back(m.atoms[j]);
            s.masses.push_back(m.masses[j]);
        }
        m = s;
    };
    sort(mu);
    sort(nu);
    std::size_t j = 0, k = 0;
    double a = mu.masses[0], b = nu.masses[0], cost = 0.0;
    while (j < mu.atoms.size() && k < nu.atoms.size()) {
        double t = std::min(a, b);
        cost += t * std::pow(std::abs(mu.atoms[j](0) - nu.atoms[k](0)), p);
        a -= t;
        b -= t;
        if (a <= 1e-15 && ++j < mu.atoms.size()) a = mu.masses[j];
        if (b <= 1e-15 && ++k < nu.atoms.size()) b = nu.masses[k];
    }
    return cost;
}

}  // namespace

TEST_CASE("cost tensor examples") {
    std::vector<double> w{0.5, 0.5};
    Vec z;
    CHECK(cp_cost({vec({0.0}), vec({1.0})}, w, 3.0, &z) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(z(0) == doctest::Approx(0.5));
    CHECK(cp_cost({vec({0.0}), vec({1.0})}, w, 2.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(cp_cost({vec({0.3, 0.1}), vec({0.3, 0.1}), vec({0.3, 0.1})}, {0.2, 0.3, 0.5}, 3.0, &z) == 0.0);
    CHECK((z - vec({0.3, 0.1})).norm() == 0.0);
    auto mu = line_measure({0.0, 1.0}, {0.5, 0.5});
    auto t = cost_tensor({mu, mu}, w, 3.0);
    CHECK(t.size() == 4);
    CHECK(t.cost[t.flatten({0, 1})] == doctest::Approx(0.125));
    CHECK(t.cost[t.flatten({1, 1})] == 0.0);
    MmotOptions small;
    small.cap = 3;
    CHECK_THROWS_AS(cost_tensor({mu, mu}, w, 3.0, small), SizeError);
}

TEST_CASE("measure ingestion") {
    auto mu = make_measure({vec({1.0}), vec({2.0}), vec({1.0})}, {0.25, 0.5, 0.25});
    CHECK(mu.size() == 2);
    CHECK(mu.masses[0] == doctest::Approx(0.5));
    try {
        make_measure({vec({1.0}), vec({2.0})}, {0.5, 0.4}, "marginals[1]");
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "marginals[1].masses");
    }
    CHECK_THROWS_AS(make_measure({vec({1.0}), vec({2.0, 3.0})}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(make_measure({vec({1.0}), vec({2.0})}, {1.5, -0.5}), ValidationError);
    CHECK_THROWS_AS(solve_mmot({mu, mu}, {0.6, 0.6}, 2.0), ValidationError);
}

TEST_CASE("solve_mmot examples") {
    std::vector<double> w{0.5, 0.5};
    auto mu = line_measure({0.0, 1.0, 3.0}, {0.2, 0.3, 0.5});
    auto plan = solve_mmot({mu, mu}, w, 3.0);
    CHECK(std::abs(plan.objective) < 1e-14);
    for (const auto& e : plan.entries) CHECK(e.index[0] == e.index[1]);
    auto nu = barycenter_measure(plan);
    CHECK(nu.size() == 3);
    for (int j = 0; j < 3; ++j) CHECK(nu.masses[j] == doctest::Approx(mu.masses[j]));

    auto single = solve_mmot({dirac(vec({0.0})), dirac(vec({1.0}))}, w, 3.0);
    REQUIRE(single.entries.size() == 1);
    CHECK(single.entries[0].mass == doctest::Approx(1.0));
    CHECK(single.objective == doctest::Approx(0.125));
    auto nu1 = barycenter_measure(single);
    CHECK(nu1.atoms[0](0) == doctest::Approx(0.5));

    auto two = solve_mmot({line_measure({0.0, 1.0}, {0.5, 0.5}), dirac(vec({0.5}))}, w, 3.0);
    double expected = 0.5 * cp_cost({vec({0.0}), vec({0.5})}, w, 3.0) + 0.5 * cp_cost({vec({1.0}), vec({0.5})}, w, 3.0);
    CHECK(two.objective == doctest::Approx(expected).epsilon(1e-12));

    auto diracs = solve_mmot({dirac(vec({0.0, 1.0})), dirac(vec({2.0, 0.0})), dirac(vec({1.0, 1.0}))}, {0.2, 0.3, 0.5}, 2.0);
    auto nu2 = barycenter_measure(diracs);
    CHECK((nu2.atoms[0] - vec({1.1, 0.7})).norm() < 1e-12);
}

TEST_CASE("solve_mmot matches vertex enumeration and plan invariants") {
    std::mt19937_64 rng(17);
    struct Shape {
        std::vector<int> k;
    };
    for (const Shape& s : {Shape{{2, 2}}, Shape{{3, 3}}, Shape{{2, 3}}, Shape{{2, 2, 2}}, Shape{{2, 2, 3}}}) {
        for (double p : {1.5, 2.0, 3.0}) {
            for (int t = 0; t < 4; ++t) {
                int d = 1 + t % 2;
                std::vector<DiscreteMeasure> ms;
                for (int k : s.k) ms.push_back(random_measure(rng, k, d));
                auto w = testsupport::random_weights(rng, static_cast<int>(ms.size()));
                auto tensor = cost_tensor(ms, w, p);
                auto plan = solve_mmot(tensor, ms, w, p);
                CHECK(plan.objective == doctest::Approx(vertex_enumeration(tensor, ms)).epsilon(1e-9));
                CHECK(plan.marginal_residual <= 1e-9);
                CHECK(plan.objective <= product_plan_cost(tensor, ms) + 1e-12);
                int sum_k = 0;
                for (int k : s.k) sum_k += k;
                CHECK(static_cast<int>(plan.entries.size()) <= sum_k - static_cast<int>(ms.size()) + 1);
                for (const auto& e : plan.entries) CHECK(e.mass >= -1e-12);
            }
        }
    }
}

TEST_CASE("plans are graphs over the first marginal") {
    std::mt19937_64 rng(23);
    auto uniform = [&](int k) {
        auto mu = random_measure(rng, k, 2);
        mu.masses.assign(k, 1.0 / k);
        return mu;
    };
    int n3_graphs = 0, n3_warnings = 0;
    for (int t = 0; t < 20; ++t) {
        auto plan2 = solve_mmot({uniform(4), uniform(4)}, {0.3, 0.7}, t % 2 ? 3.0 : 1.5);
        auto g2 = check_graph_over_first(plan2);
        CHECK((g2.is_graph || g2.warning_only));
        auto plan3 = solve_mmot({uniform(3), uniform(3), uniform(3)}, {0.2, 0.3, 0.5}, t % 2 ? 3.0 : 1.5);
        auto g3 = check_graph_over_first(plan3);
        CHECK((g3.is_graph || g3.warning_only));
        n3_graphs += g3.is_graph;
        n3_warnings += g3.warning_only;
    }
    MESSAGE("N=3 uniform: graph plans " << n3_graphs << "/20, nonunique warnings " << n3_warnings);
    // generic masses force splitting: mu_1 = (1/2, 1/2) against (1/3, 2/3)
    auto split = solve_mmot({line_measure({0.0, 1.0}, {0.5, 0.5}), line_measure({0.0, 1.0}, {1.0 / 3, 2.0 / 3})},
                            {0.5, 0.5}, 3.0);
    CHECK(check_graph_over_first(split).multi_valued_atoms == 1);
    // uniform masses on a d=1 monotone instance: the optimal plan is the sorted matching
    auto a = line_measure({0.0, 1.0, 2.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto b = line_measure({5.0, 3.0, 4.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto plan = solve_mmot({a, b}, {0.5, 0.5}, 3.0);
    CHECK(check_graph_over_first(plan).is_graph);
    for (const auto& e : plan.entries) CHECK(b.atoms[e.index[1]](0) - a.atoms[e.index[0]](0) == doctest::Approx(3.0));
}

TEST_CASE("two-marginal W_p") {
    for (double p : {1.5, 2.0, 3.0})
        CHECK(wp_distance(dirac(vec({0.0})), dirac(vec({1.0})), p) == doctest::Approx(1.0));
    std::mt19937_64 rng(29);
    auto mu = random_measure(rng, 4, 2);
    CHECK(wp_distance(mu, mu, 2.5) < 1e-9);
    for (int t = 0; t < 30; ++t) {
        auto a = random_measure(rng, 3, 1), b = random_measure(rng, 3, 1);
        for (double p : {1.5, 2.0, 3.0}) {
            auto r = ot_two_marginal(a, b, p);
            CHECK(r.cost == doctest::Approx(monotone_cost(a, b, p)).epsilon(1e-10));
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    CHECK(r.phi[j] + r.psi[k] <= std::pow(std::abs(a.atoms[j](0) - b.atoms[k](0)), p) + 1e-9);
        }
    }
}

TEST_CASE("C2M equivalence on random instances") {
    std::mt19937_64 rng(31);
    for (double p : {1.5, 2.0, 3.0}) {
        for (int t = 0; t < 6; ++t) {
            int n = 2 + t % 2, d = 1 + t % 2;
            std::vector<DiscreteMeasure> ms;
            for (int i = 0; i < n; ++i) ms.push_back(random_measure(rng, 2 + (t + i) % 4, d));
            auto w = testsupport::random_weights(rng, n);
            auto rep = verify_c2m_equivalence(ms, w, p);
            CHECK(rep.pass);
            CHECK(rep.gap <= 1e-8 * (1.0 + rep.c_mm));
        }
    }
    // p=2, two atoms each: atoms of nu_2 are weighted means of matched tuples
    auto a = line_measure({0.0, 1.0}, {0.5, 0.5});
    auto b = line_measure({2.0, 4.0}, {0.5, 0.5});
    auto rep = verify_c2m_equivalence({a, b}, {0.25, 0.75}, 2.0);
    CHECK(rep.pass);
    for (const auto& e : rep.plan.entries)
        CHECK(e.bary(0) == doctest::Approx(0.25 * a.atoms[e.index[0]](0) + 0.75 * b.atoms[e.index[1]](0)));
    auto dir = verify_c2m_equivalence({dirac(vec({0.0})), dirac(vec({2.0}))}, {0.5, 0.5}, 3.0);
    CHECK(dir.c_mm == doctest::Approx(1.0));
    CHECK(dir.sum_wp == doctest::Approx(1.0));
}

TEST_CASE("c_p-monotonicity") {
    std::mt19937_64 rng(37);
    for (int t = 0; t < 10; ++t) {
        std::vector<DiscreteMeasure> ms{random_measure(rng, 4, 2), random_measure(rng, 3, 2), random_measure(rng, 3, 2)};
        auto plan = solve_mmot(ms, {0.2, 0.3, 0.5}, t % 2 ? 3.0 : 1.5);
        auto rep = check_cp_monotone(plan);
        CHECK(rep.pass);
        CHECK(rep.pairs == plan.entries.size() * (plan.entries.size() - 1) / 2);
    }
    // exchanging two matched pairs of the sorted matching gives a worse plan that must be flagged
    auto a = line_measure({0.0, 1.0}, {0.5, 0.5});
    auto b = line_measure({2.0, 5.0}, {0.5, 0.5});
    auto plan = solve_mmot({a, b}, {0.5, 0.5}, 3.0);
    REQUIRE(plan.entries.size() == 2);
    CHECK(check_cp_monotone(plan).pass);
    std::swap(plan.entries[0].index[1], plan.entries[1].index[1]);
    auto bad = check_cp_monotone(plan);
    CHECK(!bad.pass);
    CHECK(bad.worst < -1e-3);
    auto single = solve_mmot({dirac(vec({0.0})), dirac(vec({1.0}))}, {0.5, 0.5}, 3.0);
    CHECK(check_cp_monotone(single).pass);
    CHECK(check_cp_monotone(single).pairs == 0);
}

TEST_CASE("dual potentials") {
    auto certify = [](const std::vector<DiscreteMeasure>& ms, const DualCheckReport& rep, double p) {
        for (std::size_t i = 0; i < ms.size(); ++i) {
            double value = 0.0;
            for (int j = 0; j < ms[i].size(); ++j) {
                value += ms[i].masses[j] * rep.phi[i][j];
                for (int k = 0; k < rep.nu.size(); ++k)
                    CHECK(rep.phi[i][j] + rep.psi[i][k] <=
                          std::pow((ms[i].atoms[j] - rep.nu.atoms[k]).norm(), p) + 1e-8 * (1.0 + rep.wp[i]));
            }
            for (int k = 0; k < rep.nu.size(); ++k) value += rep.nu.masses[k] * rep.psi[i][k];
            CHECK(value == doctest::Approx(rep.wp[i]).epsilon(1e-8).scale(1.0));
        }
    };
    std::mt19937_64 rng(41);
    std::vector<DiscreteMeasure> two{random_measure(rng, 4, 1), random_measure(rng, 3, 1)};
    auto r2 = dual_check_potentials(two, {0.4, 0.6}, 3.0);
    CHECK(r2.spread <= 1e-9);
    CHECK(r2.status == "exact");
    certify(two, r2, 3.0);
    std::vector<DiscreteMeasure> dir{dirac(vec({0.0, 0.0})), dirac(vec({1.0, 0.0})), dirac(vec({0.0, 2.0}))};
    auto rd = dual_check_potentials(dir, {0.2, 0.3, 0.5}, 1.5);
    CHECK(rd.spread == 0.0);
    for (int t = 0; t < 5; ++t) {
        std::vector<DiscreteMeasure> ms{random_measure(rng, 4, 2), random_measure(rng, 3, 2), random_measure(rng, 3, 2)};
        auto w = testsupport::random_weights(rng, 3);
        double p = t % 2 ? 3.0 : 1.5;
        auto rep = dual_check_potentials(ms, w, p);
        MESSAGE("spread " << rep.spread << " variance " << rep.variance << " nonunique " << rep.nonunique);
        CHECK(rep.variance <= 1e-6);
        certify(ms, rep, p);
    }
}

TEST_CASE("plan CSV") {
    auto plan = solve_mmot({dirac(vec({0.0})), dirac(vec({1.0}))}, {0.5, 0.5}, 3.0);
    std::ostringstream os;
    plan.write_csv(os);
    CHECK(os.str() == "i1,i2,mass,cost,z0\n0,0,1,0.125,0.5\n");
}
