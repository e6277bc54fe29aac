#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "pugan/geometry.hpp"
#include "pugan/mesh.hpp"

namespace pugan {

namespace detail {

inline void require_nonempty(const PointCloud& a, const PointCloud& b, const char* op) {
    if (a.empty() || b.empty()) throw Error(std::string(op) + ": empty input");
}

/// Nearest-neighbor distance from every point of `from` into `to`.
inline std::vector<double> nearest_distances(const PointCloud& from, const PointCloud& to) {
    const KdTree tree(to);
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto& p : from) out.push_back(tree.nearest(p).distance);
    return out;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Symmetric mean nearest-neighbor distance (unsquared L2), averaged over
/// both directions.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    detail::require_nonempty(a, b, "chamfer_distance");
    return 0.5 * (detail::mean(detail::nearest_distances(a, b)) + detail::mean(detail::nearest_distances(b, a)));
}

inline double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
    detail::require_nonempty(a, b, "hausdorff_distance");
    const auto ab = detail::nearest_distances(a, b);
    const auto ba = detail::nearest_distances(b, a);
    return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

/// Bijection from the first cloud onto the second: `assignment[i]` is the
/// index in the second cloud matched to point `i` of the first.
struct Matching {
    std::vector<std::size_t> assignment;
    double cost = 0.0;  // sum of matched L2 distances, accumulated in index order

    double normalized_cost() const {
        return assignment.empty() ? 0.0 : cost / static_cast<double>(assignment.size());
    }
};

inline double matching_cost(const PointCloud& a, const PointCloud& b, const std::vector<std::size_t>& assignment) {
    double c = 0.0;
    for (std::size_t i = 0; i < assignment.size(); ++i) c += distance(a[i], b[assignment[i]]);
    return c;
}

inline constexpr std::size_t kExactEmdLimit = 512;
inline constexpr double kDefaultAuctionEpsilon = 1e-3;

/// Minimum-cost perfect matching under L2 costs (Hungarian method with
/// potentials, O(n^3)).
inline Matching emd_exact(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size())
        throw Error("emd_exact: size mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.size() > kExactEmdLimit)
        throw Error("emd_exact: " + std::to_string(a.size()) + " points exceeds limit " +
                    std::to_string(kExactEmdLimit));
    if (!a.finite() || !b.finite()) throw Error("emd_exact: non-finite coordinates");
    const std::size_t n = a.size();
    Matching m;
    if (n == 0) return m;

    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(a[i], b[j]);

    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based rows/cols; column 0 is a sentinel
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        owner[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = owner[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    m.assignment.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) m.assignment[owner[j] - 1] = j - 1;
    m.cost = matching_cost(a, b, m.assignment);
    return m;
}

/// Forward auction with epsilon scaling. The final bid increment is chosen
/// so the additive gap n*eps stays below `epsilon` times a lower bound on
/// the optimum, giving cost <= (1 + epsilon) * optimal.
inline Matching emd_approx(const PointCloud& a, const PointCloud& b, double epsilon = kDefaultAuctionEpsilon) {
    if (a.size() != b.size())
        throw Error("emd_approx: size mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (!(epsilon > 0.0)) throw Error("emd_approx: epsilon must be positive");
    if (!a.finite() || !b.finite()) throw Error("emd_approx: non-finite coordinates");
    const std::size_t n = a.size();
    Matching m;
    if (n == 0) return m;
    if (n == 1) {
        m.assignment = {0};
        m.cost = distance(a[0], b[0]);
        return m;
    }

    std::vector<double> cost(n * n);
    double max_cost = 0.0;
    std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
    std::vector<double> col_min(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = distance(a[i], b[j]);
            cost[i * n + j] = c;
            max_cost = std::max(max_cost, c);
            row_min[i] = std::min(row_min[i], c);
            col_min[j] = std::min(col_min[j], c);
        }
    }
    double lower = 0.0, lower_cols = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lower += row_min[i];
        lower_cols += col_min[i];
    }
    lower = std::max(lower, lower_cols);
    const double nd = static_cast<double>(n);
    const double floor_eps = std::max(max_cost, 1e-300) * 1e-12 / nd;
    const double final_eps = std::max(epsilon * lower / nd, floor_eps);

    constexpr std::size_t unassigned = std::numeric_limits<std::size_t>::max();
    std::vector<double> price(n, 0.0);
    std::vector<std::size_t> person_of(n, unassigned);  // object -> person
    std::vector<std::size_t> object_of(n, unassigned);  // person -> object
    std::vector<std::size_t> queue;
    queue.reserve(n);

    double eps = std::max(max_cost / 4.0, final_eps);
    for (;;) {
        std::fill(person_of.begin(), person_of.end(), unassigned);
        std::fill(object_of.begin(), object_of.end(), unassigned);
        queue.clear();
        for (std::size_t i = n; i-- > 0;) queue.push_back(i);
        while (!queue.empty()) {
            const std::size_t i = queue.back();
            queue.pop_back();
            const double* row = &cost[i * n];
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double value = -row[j] - price[j];
                if (value > best) {
                    second = best;
                    best = value;
                    best_j = j;
                } else if (value > second) {
                    second = value;
                }
            }
            price[best_j] += (best - second) + eps;
            const std::size_t previous = person_of[best_j];
            person_of[best_j] = i;
            object_of[i] = best_j;
            if (previous != unassigned) {
                object_of[previous] = unassigned;
                queue.push_back(previous);
            }
        }
        if (eps <= final_eps) break;
        eps = std::max(eps / 5.0, final_eps);
    }
    m.assignment = object_of;
    m.cost = matching_cost(a, b, m.assignment);
    return m;
}

/// EMD routed by size: exact up to the assignment limit, auction beyond it.
inline Matching emd(const PointCloud& a, const PointCloud& b) {
    return a.size() <= kExactEmdLimit ? emd_exact(a, b) : emd_approx(a, b);
}

/// Percentages used for the uniformity report columns.
inline constexpr std::array<double, 5> kUniformityPercentages{0.004, 0.006, 0.008, 0.010, 0.012};

/// Expected nearest-neighbor spacing of |S| points hexagonally packed in a
/// disk of radius `radius`.
inline double expected_spacing(double radius, std::size_t count) {
    return std::sqrt(2.0 * std::numbers::pi * radius * radius / (static_cast<double>(count) * std::sqrt(3.0)));
}

/// Chi-squared deviation of a subset count from its expectation. An empty
/// subset yields the formula limit n_hat.
inline double imbalance(std::size_t count, double expected) {
    const double d = static_cast<double>(count) - expected;
    return d * d / expected;
}

/// One cropped subset with the frozen nearest-neighbor structure used by
/// both the metric and the differentiable loss.
struct UniformCrop {
    std::vector<std::size_t> members;  // indices into Q
    std::vector<std::size_t> nearest;  // nearest other member (index into Q), per member
    double imbalance = 0.0;
    double spacing = 0.0;              // d_hat; 0 when |S| < 2
};

/// Nearest other member within the subset for each member (ties to lower index).
inline std::vector<std::size_t> nearest_within(const PointCloud& q, const std::vector<std::size_t>& members) {
    std::vector<std::size_t> out(members.size(), 0);
    if (members.size() < 2) return out;
    const PointCloud sub = select(q, members);
    const KdTree tree(sub);
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto nn = tree.knn(sub[k], 2);
        // the member itself is at distance 0; a duplicate may sort before it
        const std::size_t other = nn[0].index == k ? nn[1].index : nn[0].index;
        out[k] = members[other];
    }
    return out;
}

inline UniformCrop make_crop(const PointCloud& q, std::vector<std::size_t> members, double radius, double n_hat) {
    UniformCrop crop;
    crop.imbalance = imbalance(members.size(), n_hat);
    if (members.size() >= 2) {
        crop.spacing = expected_spacing(radius, members.size());
        crop.nearest = nearest_within(q, members);
    }
    crop.members = std::move(members);
    return crop;
}

/// Sum over k of (d_k - d_hat)^2 / d_hat; zero for subsets with fewer than two points.
inline double clutter(const PointCloud& q, const UniformCrop& crop) {
    if (crop.members.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < crop.members.size(); ++k) {
        const double d = distance(q[crop.members[k]], q[crop.nearest[k]]);
        s += (d - crop.spacing) * (d - crop.spacing) / crop.spacing;
    }
    return s;
}

/// Ball-query crops of radius sqrt(p) at `seeds` farthest-point seeds,
/// starting the sampling at `start_index`.
inline std::vector<UniformCrop> uniform_crops(const PointCloud& q, double p, std::size_t seeds,
                                              std::size_t start_index) {
    if (!(p > 0.0 && p < 1.0)) throw Error("uniformity: p must lie in (0, 1)");
    if (seeds == 0) throw Error("uniformity: seed count must be positive");
    if (q.empty()) throw Error("uniformity: empty input");
    const double radius = std::sqrt(p);
    const double n_hat = static_cast<double>(q.size()) * p;
    const KdTree tree(q);
    const auto seed_idx = farthest_point_sampling(q, std::min(seeds, q.size()), start_index);
    std::vector<UniformCrop> crops;
    crops.reserve(seed_idx.size());
    for (std::size_t s : seed_idx) crops.push_back(make_crop(q, tree.ball(q[s], radius), radius, n_hat));
    return crops;
}

inline double uniformity_from_crops(const PointCloud& q, const std::vector<UniformCrop>& crops) {
    double total = 0.0;
    for (const auto& c : crops) total += c.imbalance * clutter(q, c);
    return total;
}

/// Uniformity measure with a fixed FPS start point.
inline double uniformity_loss_value_from(const PointCloud& q, double p, std::size_t seeds, std::size_t start_index) {
    return uniformity_from_crops(q, uniform_crops(q, p, seeds, start_index));
}

/// Uniformity measure for a unit-sphere-normalized patch; the FPS start
/// point is drawn from `seed`.
inline double uniformity_loss_value(const PointCloud& q, double p, std::size_t seeds, std::uint64_t seed) {
    if (q.empty()) throw Error("uniformity: empty input");
    Rng rng(seed);
    const std::size_t start = static_cast<std::size_t>(rng() % q.size());
    return uniformity_loss_value_from(q, p, seeds, start);
}

struct UniformityReport {
    std::array<double, kUniformityPercentages.size()> values{};
    std::size_t seeds = 0;

    friend bool operator==(const UniformityReport&, const UniformityReport&) = default;
};

inline constexpr std::size_t kDefaultReportSeeds = 1000;

/// Geodesic uniformity evaluation against a reference mesh. Subsets are the
/// points of Q whose nearest dense-pool node lies within geodesic radius
/// sqrt(p * area / pi) of the seed's node, so each disk covers fraction p
/// of the surface; n_hat = p * |Q|.
class MeshUniformity {
public:
    MeshUniformity(const TriangleMesh& mesh, std::size_t pool_size = kDefaultPoolSize, std::uint64_t pool_seed = 0)
        : area_(mesh.total_area()), graph_(positions(area_weighted_sample(mesh, pool_size, pool_seed))) {}

    double radius_for(double p) const { return std::sqrt(p * area_ / std::numbers::pi); }

    UniformityReport evaluate(const PointCloud& q, std::size_t seeds, std::uint64_t seed) const {
        if (q.empty()) throw Error("uniformity_report_mesh: empty input");
        if (seeds == 0) throw Error("uniformity_report_mesh: seed count must be positive");
        // bucket Q by nearest pool node
        std::vector<std::vector<std::size_t>> bucket(graph_.size());
        for (std::size_t i = 0; i < q.size(); ++i) bucket[graph_.nearest_node(q[i])].push_back(i);

        Rng rng(seed);
        UniformityReport report;
        report.seeds = seeds;
        const double max_radius = radius_for(kUniformityPercentages.back());
        for (std::size_t j = 0; j < seeds; ++j) {
            const std::size_t s = static_cast<std::size_t>(rng() % q.size());
            const auto reached = graph_.within(graph_.nearest_node(q[s]), max_radius);
            for (std::size_t pi = 0; pi < kUniformityPercentages.size(); ++pi) {
                const double p = kUniformityPercentages[pi];
                const double r = radius_for(p);
                std::vector<std::size_t> members;
                for (const auto& node : reached) {
                    if (node.distance > r) break;
                    members.insert(members.end(), bucket[node.node].begin(), bucket[node.node].end());
                }
                std::sort(members.begin(), members.end());
                const auto crop = make_crop(q, std::move(members), r, p * static_cast<double>(q.size()));
                report.values[pi] += crop.imbalance * clutter(q, crop);
            }
        }
        return report;
    }

private:
    double area_;
    GeodesicGraph graph_;
};

inline UniformityReport uniformity_report_mesh(const PointCloud& q, const TriangleMesh& mesh,
                                               std::size_t seeds = kDefaultReportSeeds, std::uint64_t seed = 0) {
    return MeshUniformity(mesh, kDefaultPoolSize, seed).evaluate(q, seeds, seed);
}

struct SurfaceError {
    double mean = 0.0;
    double max = 0.0;
};

inline SurfaceError point_to_surface(const PointCloud& q, const TriangleMesh& mesh) {
    if (q.empty()) throw Error("point_to_surface: empty input");
    const SurfaceDistance bvh(mesh);
    SurfaceError e;
    for (const auto& p : q) {
        const double d = bvh.distance_to(p);
        e.mean += d;
        e.max = std::max(e.max, d);
    }
    e.mean /= static_cast<double>(q.size());
    return e;
}

/// One row of the evaluation CSV.
struct EvaluationRow {
    std::string model;
    double chamfer = 0.0;
    double hausdorff = 0.0;
    SurfaceError p2f;
    UniformityReport uniformity;
};

inline constexpr const char* kReportHeader = "model,CD,HD,P2F_mean,P2F_max,uni_0.4,uni_0.6,uni_0.8,uni_1.0,uni_1.2";

inline void write_report_row(std::ostream& out, const EvaluationRow& row) {
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out << buf;
    };
    out << row.model;
    put(row.chamfer);
    put(row.hausdorff);
    put(row.p2f.mean);
    put(row.p2f.max);
    for (double v : row.uniformity.values) put(v);
    out << '\n';
}

}  // namespace pugan
