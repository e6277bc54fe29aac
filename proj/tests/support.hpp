#pragma once

// Shared oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "pugan/pugan.hpp"

namespace pugan::testing {

inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
    Rng rng(seed);
    PointCloud c;
    c.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.push_back({extent * (2 * uniform01(rng) - 1), extent * (2 * uniform01(rng) - 1),
                     extent * (2 * uniform01(rng) - 1)});
    return c;
}

inline Array2 random_array(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = -1.0,
                           double hi = 1.0) {
    Rng rng(seed);
    Array2 a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = lo + (hi - lo) * uniform01(rng);
    return a;
}

/// Minimum matching cost by enumerating every permutation.
inline double brute_force_emd(const PointCloud& a, const PointCloud& b) {
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) c += distance(a[i], b[perm[i]]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Brute-force k nearest with ties broken by index.
inline std::vector<Neighbor> brute_knn(const PointCloud& c, const Point3& q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < c.size(); ++i) all.emplace_back(squared_distance(c[i], q), i);
    std::sort(all.begin(), all.end());
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
    return out;
}

inline std::vector<std::size_t> brute_ball(const PointCloud& c, const Point3& q, double r) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (squared_distance(c[i], q) <= r * r) out.push_back(i);
    return out;
}

inline double brute_p2f(const TriangleMesh& mesh, const Point3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
        const auto c = mesh.corners(t);
        best = std::min(best, point_triangle_squared_distance(p, c[0], c[1], c[2]));
    }
    return std::sqrt(best);
}

/// Central finite-difference check of d loss / d t for every tensor in
/// `wrt`. Returns the largest relative error ||a - n|| / max(||a||, ||n||)
/// over the tensors (absolute error when both norms are tiny).
inline double gradient_error(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, double h = 1e-4) {
    for (auto& t : wrt) t.zero_grad();
    nn::backward(loss());
    double worst = 0.0;
    for (auto& t : wrt) {
        const Array2 analytic = t.grad();
        Array2 numeric(t.rows(), t.cols());
        Array2& v = t.mutable_value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double keep = v.data()[i];
            double plus, minus;
            {
                nn::NoGradGuard guard;
                v.data()[i] = keep + h;
                plus = loss().item();
                v.data()[i] = keep - h;
                minus = loss().item();
            }
            v.data()[i] = keep;
            numeric.data()[i] = (plus - minus) / (2 * h);
        }
        const double scale = std::max(analytic.norm(), numeric.norm());
        const double diff = (analytic - numeric).norm();
        worst = std::max(worst, scale > 1e-8 ? diff / scale : diff);
        t.zero_grad();
    }
    return worst;
}

/// Weighted sum of every entry, giving each output element a distinct
/// sensitivity.
inline Tensor probe(const Tensor& x, std::uint64_t seed = 99) {
    return nn::sum_all(nn::mul(x, nn::constant(random_array(x.rows(), x.cols(), seed))));
}

/// Zero-initialized biases put dead units exactly on the ReLU kink, where a
/// central difference sees half the slope. Random biases move the probe point
/// off the kink without changing what is being checked.
inline void randomize_biases(nn::ParamStore& store, std::uint64_t seed = 17) {
    for (auto& e : store.entries())
        if (e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, "/b") == 0) {
            Tensor t = e.tensor;
            t.mutable_value() = random_array(t.rows(), t.cols(), seed++, -0.5, 0.5);
        }
}

inline std::vector<Tensor> all_parameters(const nn::ParamStore& store) {
    std::vector<Tensor> out;
    for (const auto& e : store.entries()) out.push_back(e.tensor);
    return out;
}

}  // namespace pugan::testing
