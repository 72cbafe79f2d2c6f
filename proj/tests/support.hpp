#pragma once

#include "wbary/barycenter.hpp"

#include <random>
#include <vector>

namespace testsupport {

using wbary::Mat;
using wbary::Vec;

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline std::vector<double> random_weights(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = u(rng));
    for (auto& x : w) x /= s;
    return w;
}

inline Vec random_vec(std::mt19937_64& rng, int d, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vec v(d);
    for (int k = 0; k < d; ++k) v(k) = u(rng);
    return v;
}

inline wbary::WeightedPointConfig random_config(std::mt19937_64& rng, int n, int d, double p) {
    wbary::WeightedPointConfig c;
    c.p = p;
    c.weights = random_weights(rng, n);
    for (int i = 0; i < n; ++i) c.points.push_back(random_vec(rng, d));
    return c;
}

inline Mat random_orthogonal(std::mt19937_64& rng, int d) {
    Mat a(d, d);
    std::normal_distribution<double> g;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Mat> qr(a);
    return qr.householderQ();
}

}  // namespace testsupport
