#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pugan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Point3& operator+=(const Point3& o) noexcept {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    constexpr Point3& operator-=(const Point3& o) noexcept {
        x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    constexpr Point3& operator*=(double s) noexcept {
        x *= s; y *= s; z *= s;
        return *this;
    }
    friend constexpr Point3 operator+(Point3 a, const Point3& b) noexcept { return a += b; }
    friend constexpr Point3 operator-(Point3 a, const Point3& b) noexcept { return a -= b; }
    friend constexpr Point3 operator*(Point3 a, double s) noexcept { return a *= s; }
    friend constexpr Point3 operator*(double s, Point3 a) noexcept { return a *= s; }
    friend constexpr Point3 operator/(Point3 a, double s) noexcept { return a *= (1.0 / s); }
    friend constexpr bool operator==(const Point3&, const Point3&) = default;

    constexpr double operator[](std::size_t axis) const noexcept {
        return axis == 0 ? x : (axis == 1 ? y : z);
    }

    bool finite() const noexcept {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

constexpr double dot(const Point3& a, const Point3& b) noexcept {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr Point3 cross(const Point3& a, const Point3& b) noexcept {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

constexpr double squared_norm(const Point3& a) noexcept { return dot(a, a); }

inline double norm(const Point3& a) noexcept { return std::sqrt(squared_norm(a)); }

constexpr double squared_distance(const Point3& a, const Point3& b) noexcept {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) noexcept {
    return std::sqrt(squared_distance(a, b));
}

/// Ordered set of 3D points. Order is meaningful: indices returned by
/// queries refer to positions in `points`.
struct PointCloud {
    std::vector<Point3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}
    PointCloud(std::initializer_list<Point3> pts) : points(pts) {}

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    const Point3& operator[](std::size_t i) const noexcept { return points[i]; }
    Point3& operator[](std::size_t i) noexcept { return points[i]; }
    auto begin() const noexcept { return points.begin(); }
    auto end() const noexcept { return points.end(); }
    auto begin() noexcept { return points.begin(); }
    auto end() noexcept { return points.end(); }
    void push_back(const Point3& p) { points.push_back(p); }
    void reserve(std::size_t n) { points.reserve(n); }

    bool finite() const noexcept {
        return std::all_of(points.begin(), points.end(), [](const Point3& p) { return p.finite(); });
    }

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

inline PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices) {
    PointCloud out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(cloud[i]);
    return out;
}

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact kd-tree over a point cloud. Immutable after construction; const
/// queries are safe to run concurrently. Queries return exactly the
/// brute-force answer, ties broken by lower point index.
class KdTree {
public:
    explicit KdTree(const PointCloud& cloud) : points_(cloud.points) {
        if (points_.empty()) throw Error("build_index: empty input");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, order_.size());
    }

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Point3>& points() const noexcept { return points_; }

    std::vector<Neighbor> knn(const Point3& query, std::size_t k) const {
        if (k == 0) throw Error("knn: k must be positive");
        if (k > points_.size())
            throw Error("knn: k=" + std::to_string(k) + " exceeds indexed count " +
                        std::to_string(points_.size()));
        // max-heap on (d2, index): top is the current worst candidate
        std::priority_queue<std::pair<double, std::size_t>> heap;
        knn_recurse(0, query, k, heap);
        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = {heap.top().second, std::sqrt(heap.top().first)};
            heap.pop();
        }
        return out;
    }

    /// Nearest point, ties to lower index.
    Neighbor nearest(const Point3& query) const { return knn(query, 1).front(); }

    /// Indices of all points within the closed ball, ascending.
    std::vector<std::size_t> ball(const Point3& center, double radius) const {
        std::vector<std::size_t> out;
        if (!(radius >= 0.0)) throw Error("ball_query: radius must be non-negative");
        ball_recurse(0, center, radius * radius, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static constexpr std::size_t kLeafSize = 8;

    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        std::size_t left = 0;   // 0 marks a leaf (root is never a child)
        std::size_t right = 0;
        std::array<double, 3> lo{};
        std::array<double, 3> hi{};
    };

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity()};
        node.hi = {-node.lo[0], -node.lo[1], -node.lo[2]};
        for (std::size_t i = begin; i < end; ++i) {
            const Point3& p = points_[order_[i]];
            for (std::size_t a = 0; a < 3; ++a) {
                node.lo[a] = std::min(node.lo[a], p[a]);
                node.hi[a] = std::max(node.hi[a], p[a]);
            }
        }
        if (end - begin > kLeafSize) {
            std::size_t axis = 0;
            for (std::size_t a = 1; a < 3; ++a)
                if (node.hi[a] - node.lo[a] > node.hi[axis] - node.lo[axis]) axis = a;
            const std::size_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                             order_.begin() + static_cast<std::ptrdiff_t>(mid),
                             order_.begin() + static_cast<std::ptrdiff_t>(end),
                             [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
            node.left = build(begin, mid);
            node.right = build(mid, end);
        }
        nodes_[id] = node;
        return id;
    }

    static double box_squared_distance(const Node& n, const Point3& q) noexcept {
        double d2 = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
            const double v = q[a];
            double d = 0.0;
            if (v < n.lo[a]) d = n.lo[a] - v;
            else if (v > n.hi[a]) d = v - n.hi[a];
            d2 += d * d;
        }
        return d2;
    }

    void knn_recurse(std::size_t id, const Point3& q, std::size_t k,
                     std::priority_queue<std::pair<double, std::size_t>>& heap) const {
        const Node& n = nodes_[id];
        if (heap.size() == k && box_squared_distance(n, q) > heap.top().first) return;
        if (n.left == 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const std::size_t idx = order_[i];
                const std::pair<double, std::size_t> cand{squared_distance(points_[idx], q), idx};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double dl = box_squared_distance(nodes_[n.left], q);
        const double dr = box_squared_distance(nodes_[n.right], q);
        if (dl <= dr) {
            knn_recurse(n.left, q, k, heap);
            knn_recurse(n.right, q, k, heap);
        } else {
            knn_recurse(n.right, q, k, heap);
            knn_recurse(n.left, q, k, heap);
        }
    }

    void ball_recurse(std::size_t id, const Point3& c, double r2, std::vector<std::size_t>& out) const {
        const Node& n = nodes_[id];
        if (box_squared_distance(n, c) > r2) return;
        if (n.left == 0) {
            for (std::size_t i = n.begin; i < n.end; ++i)
                if (squared_distance(points_[order_[i]], c) <= r2) out.push_back(order_[i]);
            return;
        }
        ball_recurse(n.left, c, r2, out);
        ball_recurse(n.right, c, r2, out);
    }

    std::vector<Point3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

inline KdTree build_index(const PointCloud& cloud) { return KdTree(cloud); }

inline std::vector<Neighbor> knn(const KdTree& index, const Point3& query, std::size_t k) {
    return index.knn(query, k);
}

inline std::vector<std::size_t> ball_query(const KdTree& index, const Point3& center, double radius) {
    if (!(radius > 0.0)) throw Error("ball_query: radius must be positive");
    return index.ball(center, radius);
}

/// Greedy max-min selection. The first index is `seed_index`; every later
/// index maximizes the distance to the selected set (ties to lower index).
inline std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t k,
                                                        std::size_t seed_index = 0) {
    const std::size_t n = cloud.size();
    if (k == 0 || k > n)
        throw Error("farthest_point_sampling: k=" + std::to_string(k) + " out of range [1, " +
                    std::to_string(n) + "]");
    if (seed_index >= n) throw Error("farthest_point_sampling: seed_index out of range");
    std::vector<std::size_t> selected;
    selected.reserve(k);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::size_t current = seed_index;
    for (std::size_t s = 0; s < k; ++s) {
        selected.push_back(current);
        min_d2[current] = -1.0;
        const Point3 c = cloud[current];
        std::size_t best = 0;
        double best_d2 = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (min_d2[i] < 0.0) continue;
            const double d2 = squared_distance(cloud[i], c);
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        current = best;
    }
    return selected;
}

struct Normalization {
    Point3 centroid;
    double scale = 1.0;

    Point3 apply(const Point3& p) const noexcept { return (p - centroid) / scale; }
    Point3 invert(const Point3& p) const noexcept { return p * scale + centroid; }

    PointCloud apply(const PointCloud& c) const {
        PointCloud out;
        out.reserve(c.size());
        for (const auto& p : c) out.push_back(apply(p));
        return out;
    }
    PointCloud invert(const PointCloud& c) const {
        PointCloud out;
        out.reserve(c.size());
        for (const auto& p : c) out.push_back(invert(p));
        return out;
    }
};

struct NormalizedCloud {
    PointCloud cloud;
    Normalization transform;
};

inline Normalization fit_unit_sphere(const PointCloud& cloud) {
    if (cloud.empty()) throw Error("normalize_unit_sphere: empty input");
    Point3 c;
    for (const auto& p : cloud) c += p;
    c = c / static_cast<double>(cloud.size());
    double r2 = 0.0;
    for (const auto& p : cloud) r2 = std::max(r2, squared_distance(p, c));
    const double scale = r2 > 0.0 ? std::sqrt(r2) : 1.0;
    return {c, scale};
}

/// Centers the cloud at its centroid and scales the farthest point to norm 1.
inline NormalizedCloud normalize_unit_sphere(const PointCloud& cloud) {
    const Normalization t = fit_unit_sphere(cloud);
    return {t.apply(cloud), t};
}

}  // namespace pugan
