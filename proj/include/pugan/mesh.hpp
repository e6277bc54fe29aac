#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pugan/geometry.hpp"
#include "pugan/xyz_io.hpp"

namespace pugan {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the full 53-bit mantissa.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

using Triangle = std::array<std::uint32_t, 3>;

inline double triangle_area(const Point3& a, const Point3& b, const Point3& c) noexcept {
    return 0.5 * norm(cross(b - a, c - a));
}

/// Validated triangle mesh with cached per-triangle areas.
class TriangleMesh {
public:
    static constexpr double kMinTriangleArea = 1e-12;

    TriangleMesh() = default;

    TriangleMesh(std::vector<Point3> vertices, std::vector<Triangle> triangles)
        : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
        validate();
    }

    const std::vector<Point3>& vertices() const noexcept { return vertices_; }
    const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    const std::vector<double>& areas() const noexcept { return areas_; }
    double total_area() const noexcept { return total_area_; }

    std::array<Point3, 3> corners(std::size_t t) const noexcept {
        const Triangle& tri = triangles_[t];
        return {vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]};
    }

    /// Triangle index for a uniform variate in [0, 1), proportional to area.
    std::size_t triangle_for(double u) const noexcept {
        const double target = u * total_area_;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
        return std::min(idx, triangles_.size() - 1);
    }

    /// Copy fitted into the unit sphere (vertex centroid at the origin).
    TriangleMesh normalized() const {
        const Normalization t = fit_unit_sphere(PointCloud(vertices_));
        std::vector<Point3> v;
        v.reserve(vertices_.size());
        for (const auto& p : vertices_) v.push_back(t.apply(p));
        return TriangleMesh(std::move(v), triangles_);
    }

private:
    void validate() {
        if (vertices_.empty() || triangles_.empty()) throw Error("mesh: no triangles");
        for (const auto& p : vertices_)
            if (!p.finite()) throw Error("mesh: non-finite vertex");
        areas_.reserve(triangles_.size());
        cumulative_.reserve(triangles_.size());
        double acc = 0.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            for (auto v : triangles_[t])
                if (v >= vertices_.size())
                    throw Error("mesh: triangle " + std::to_string(t) + " references vertex " +
                                std::to_string(v) + " out of range");
            const auto [a, b, c] = corners(t);
            const double area = triangle_area(a, b, c);
            if (!(area > kMinTriangleArea))
                throw Error("mesh: degenerate triangle " + std::to_string(t));
            areas_.push_back(area);
            acc += area;
            cumulative_.push_back(acc);
        }
        total_area_ = acc;
    }

    std::vector<Point3> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<double> areas_;
    std::vector<double> cumulative_;
    double total_area_ = 0.0;
};

namespace detail {

/// Whitespace token reader that skips '#' comments and tracks line numbers.
class TokenReader {
public:
    TokenReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    bool next_line(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(source_, line_no_, what);
    }

    std::size_t line() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

inline Triangle parse_face(std::istringstream& ls, TokenReader& reader) {
    long count = 0;
    if (!(ls >> count)) reader.fail("malformed face");
    if (count != 3) reader.fail("non-triangle face (" + std::to_string(count) + " vertices)");
    long a = 0, b = 0, c = 0;
    if (!(ls >> a >> b >> c)) reader.fail("malformed face");
    if (a < 0 || b < 0 || c < 0) reader.fail("negative vertex index");
    return {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
}

}  // namespace detail

/// ASCII OFF, triangles only. Returned mesh is not normalized.
inline TriangleMesh read_off(std::istream& in, const std::string& source = "<off>") {
    detail::TokenReader reader(in, source);
    std::string line;
    if (!reader.next_line(line)) reader.fail("empty file");
    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic.rfind("OFF", 0) != 0) reader.fail("missing OFF header");
    if (magic != "OFF") reader.fail("unsupported OFF variant '" + magic + "'");
    long nv = -1, nf = -1, ne = 0;
    if (!(header >> nv)) {
        if (!reader.next_line(line)) reader.fail("missing counts");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf)) reader.fail("malformed counts");
        counts >> ne;
    } else if (!(header >> nf)) {
        reader.fail("malformed counts");
    }
    if (nv <= 0 || nf <= 0) reader.fail("mesh has no vertices or faces");
    std::vector<Point3> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!reader.next_line(line)) reader.fail("unexpected end of file in vertices");
        std::istringstream ls(line);
        Point3 p;
        if (!(ls >> p.x >> p.y >> p.z)) reader.fail("malformed vertex");
        vertices.push_back(p);
    }
    std::vector<Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(nf));
    for (long i = 0; i < nf; ++i) {
        if (!reader.next_line(line)) reader.fail("unexpected end of file in faces");
        std::istringstream ls(line);
        triangles.push_back(detail::parse_face(ls, reader));
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
}

/// ASCII PLY with a `vertex` element (x, y, z properties) and a `face`
/// element carrying one vertex-index list. Other elements are skipped.
inline TriangleMesh read_ply(std::istream& in, const std::string& source = "<ply>") {
    detail::TokenReader reader(in, source);
    std::string line;
    if (!reader.next_line(line) || line.rfind("ply", 0) != 0) reader.fail("missing ply header");

    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> properties;
        bool list_first = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    for (;;) {
        if (!reader.next_line(line)) reader.fail("unterminated header");
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "end_header") break;
        if (key == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") reader.fail("binary PLY not supported (format " + fmt + ")");
            ascii = true;
        } else if (key == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (key == "property") {
            if (elements.empty()) reader.fail("property before element");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ls >> count_type >> item_type;
                if (elements.back().properties.empty()) elements.back().list_first = true;
            }
            ls >> name;
            elements.back().properties.push_back(name);
        }
    }
    if (!ascii) reader.fail("missing format line");

    std::vector<Point3> vertices;
    std::vector<Triangle> triangles;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            std::array<std::size_t, 3> slot{};
            for (std::size_t a = 0; a < 3; ++a) {
                const char* axis[] = {"x", "y", "z"};
                auto it = std::find(e.properties.begin(), e.properties.end(), axis[a]);
                if (it == e.properties.end()) reader.fail(std::string("vertex lacks property ") + axis[a]);
                slot[a] = static_cast<std::size_t>(it - e.properties.begin());
            }
            for (long i = 0; i < e.count; ++i) {
                if (!reader.next_line(line)) reader.fail("unexpected end of file in vertices");
                std::istringstream ls(line);
                std::vector<double> values(e.properties.size());
                for (auto& v : values)
                    if (!(ls >> v)) reader.fail("malformed vertex");
                vertices.push_back({values[slot[0]], values[slot[1]], values[slot[2]]});
            }
        } else if (e.name == "face") {
            if (!e.list_first) reader.fail("face element must start with a vertex index list");
            for (long i = 0; i < e.count; ++i) {
                if (!reader.next_line(line)) reader.fail("unexpected end of file in faces");
                std::istringstream ls(line);
                triangles.push_back(detail::parse_face(ls, reader));
            }
        } else {
            for (long i = 0; i < e.count; ++i)
                if (!reader.next_line(line)) reader.fail("unexpected end of file in element " + e.name);
        }
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
}

/// Loads an ASCII OFF or PLY mesh and fits it into the unit sphere.
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string first;
    std::getline(in, first);
    in.clear();
    in.seekg(0);
    if (first.rfind("ply", 0) == 0) return read_ply(in, path.string()).normalized();
    if (first.rfind("OFF", 0) == 0) return read_off(in, path.string()).normalized();
    throw Error(path.string() + ": unrecognized mesh format (expected OFF or PLY)");
}

inline void write_off(std::ostream& out, const TriangleMesh& mesh) {
    out << "OFF\n" << mesh.vertices().size() << ' ' << mesh.triangles().size() << " 0\n";
    char buf[128];
    for (const auto& v : mesh.vertices()) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

struct SurfaceSample {
    Point3 position;
    std::size_t triangle = 0;
    std::array<double, 3> barycentric{};
};

inline PointCloud positions(const std::vector<SurfaceSample>& samples) {
    PointCloud out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.position);
    return out;
}

inline SurfaceSample sample_triangle(const TriangleMesh& mesh, std::size_t t, double u1, double u2) {
    const double su = std::sqrt(u1);
    const std::array<double, 3> b{1.0 - su, su * (1.0 - u2), su * u2};
    const auto [a, bb, c] = mesh.corners(t);
    return {a * b[0] + bb * b[1] + c * b[2], t, b};
}

/// `n` i.i.d. samples: triangle proportional to area, uniform barycentric.
inline std::vector<SurfaceSample> area_weighted_sample(const TriangleMesh& mesh, std::size_t n,
                                                       std::uint64_t seed) {
    if (n == 0) throw Error("area_weighted_sample: n must be positive");
    Rng rng(seed);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = mesh.triangle_for(uniform01(rng));
        const double u1 = uniform01(rng);
        const double u2 = uniform01(rng);
        out.push_back(sample_triangle(mesh, t, u1, u2));
    }
    return out;
}

/// Hexagonal-packing radius for `m` points on a surface of area `area`.
inline double poisson_disk_radius(double area, std::size_t m) {
    return std::sqrt(area / (2.0 * std::sqrt(3.0) * static_cast<double>(m)));
}

/// Weighted sample elimination: repeatedly drops the pool point with the
/// largest crowding weight sum(1 - d/(2 r_max))^8 until `m` remain.
/// Returns the surviving pool indices in ascending order.
inline std::vector<std::size_t> eliminate_samples(const PointCloud& pool, std::size_t m, double r_max) {
    const std::size_t n = pool.size();
    if (m == 0) throw Error("sample elimination: target count must be positive");
    if (m > n) throw Error("sample elimination: pool of " + std::to_string(n) + " smaller than target " +
                           std::to_string(m));
    std::vector<std::size_t> keep(n);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (m == n) return keep;

    const double reach = 2.0 * r_max;
    const KdTree tree(pool);
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbors(n);
    std::vector<double> weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : tree.ball(pool[i], reach)) {
            if (j == i) continue;
            const double d = distance(pool[i], pool[j]);
            const double w = std::pow(1.0 - d / reach, 8);
            neighbors[i].emplace_back(j, w);
            weight[i] += w;
        }
    }
    // max weight first; among equal weights the lower index is removed first
    using Entry = std::pair<double, std::size_t>;
    auto cmp = [](const Entry& a, const Entry& b) {
        return a.first < b.first || (a.first == b.first && a.second > b.second);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
    for (std::size_t i = 0; i < n; ++i) heap.emplace(weight[i], i);
    std::vector<char> alive(n, 1);
    std::size_t remaining = n;
    while (remaining > m) {
        const auto [w, i] = heap.top();
        heap.pop();
        if (!alive[i] || w != weight[i]) continue;
        alive[i] = 0;
        --remaining;
        for (const auto& [j, wij] : neighbors[i]) {
            if (!alive[j]) continue;
            weight[j] -= wij;
            heap.emplace(weight[j], j);
        }
    }
    keep.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) keep.push_back(i);
    return keep;
}

inline constexpr std::size_t kPoissonPoolFactor = 5;

/// Poisson-disk sampling by weighted sample elimination from a 5m pool.
inline std::vector<SurfaceSample> poisson_disk_sample(const TriangleMesh& mesh, std::size_t m,
                                                      std::uint64_t seed) {
    if (m == 0) throw Error("poisson_disk_sample: m must be positive");
    constexpr std::size_t kMaxPool = std::size_t{1} << 26;
    if (m > kMaxPool / kPoissonPoolFactor) throw Error("poisson_disk_sample: target count too large for pool");
    const auto pool = area_weighted_sample(mesh, kPoissonPoolFactor * m, seed);
    const auto kept = eliminate_samples(positions(pool), m, poisson_disk_radius(mesh.total_area(), m));
    std::vector<SurfaceSample> out;
    out.reserve(m);
    for (std::size_t i : kept) out.push_back(pool[i]);
    return out;
}

/// Symmetrized k-nearest-neighbor graph with Euclidean edge weights; graph
/// shortest paths stand in for surface geodesics.
class GeodesicGraph {
public:
    static constexpr std::size_t kDefaultNeighbors = 10;

    explicit GeodesicGraph(const PointCloud& nodes, std::size_t k = kDefaultNeighbors)
        : tree_(nodes) {
        const std::size_t n = nodes.size();
        const std::size_t kk = std::min(k + 1, n);
        std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& nb : tree_.knn(nodes[i], kk)) {
                if (nb.index == i) continue;
                adj[i].emplace_back(nb.index, nb.distance);
                adj[nb.index].emplace_back(i, nb.distance);
            }
        }
        offsets_.resize(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& list = adj[i];
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end(),
                                   [](const auto& a, const auto& b) { return a.first == b.first; }),
                       list.end());
            offsets_[i + 1] = offsets_[i] + list.size();
        }
        edges_.reserve(offsets_.back());
        for (auto& list : adj) edges_.insert(edges_.end(), list.begin(), list.end());
    }

    std::size_t size() const noexcept { return tree_.size(); }
    PointCloud nodes() const { return PointCloud(tree_.points()); }
    const KdTree& index() const noexcept { return tree_; }
    std::size_t nearest_node(const Point3& p) const { return tree_.nearest(p).index; }

    struct Reached {
        std::size_t node;
        double distance;
    };

    /// Dijkstra from `source`, visiting nodes in (distance, index) order and
    /// stopping once `stop(count, distance)` returns true for the next node.
    template <typename Stop>
    std::vector<Reached> expand(std::size_t source, Stop&& stop) const {
        std::vector<Reached> out;
        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
        if (dist_.size() != size()) {
            dist_.assign(size(), std::numeric_limits<double>::infinity());
            done_.assign(size(), 0);
        }
        std::vector<std::size_t> touched;
        dist_[source] = 0.0;
        touched.push_back(source);
        heap.emplace(0.0, source);
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (done_[u]) continue;
            if (stop(out.size(), d)) break;
            done_[u] = 1;
            out.push_back({u, d});
            for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
                const auto [v, w] = edges_[e];
                const double nd = d + w;
                if (!done_[v] && nd < dist_[v]) {
                    if (dist_[v] == std::numeric_limits<double>::infinity()) touched.push_back(v);
                    dist_[v] = nd;
                    heap.emplace(nd, v);
                }
            }
        }
        for (std::size_t t : touched) {
            dist_[t] = std::numeric_limits<double>::infinity();
            done_[t] = 0;
        }
        return out;
    }

    std::vector<Reached> nearest_by_graph(std::size_t source, std::size_t count) const {
        return expand(source, [count](std::size_t n, double) { return n >= count; });
    }

    std::vector<Reached> within(std::size_t source, double radius) const {
        return expand(source, [radius](std::size_t, double d) { return d > radius; });
    }

private:
    KdTree tree_;
    std::vector<std::size_t> offsets_;
    std::vector<std::pair<std::size_t, double>> edges_;
    // scratch for expand(); makes concurrent expand() calls on one graph unsafe
    mutable std::vector<double> dist_;
    mutable std::vector<char> done_;
};

struct Patch {
    std::vector<SurfaceSample> samples;
    SurfaceSample seed;
    double area_fraction = 0.0;
    std::vector<std::size_t> pool_indices;  // graph order (nearest first)
};

inline constexpr std::size_t kDefaultPoolSize = 50000;
inline constexpr std::size_t kMinPatchPool = 1000;

/// Grows geodesic patches over one dense pool; the kNN graph is built once.
class PatchGrower {
public:
    PatchGrower(std::vector<SurfaceSample> pool, std::size_t k = GeodesicGraph::kDefaultNeighbors)
        : pool_(std::move(pool)), graph_(check_pool(positions(pool_)), k) {}

    const std::vector<SurfaceSample>& pool() const noexcept { return pool_; }
    const GeodesicGraph& graph() const noexcept { return graph_; }

    Patch grow(const SurfaceSample& seed, double fraction) const {
        if (!(fraction > 0.0 && fraction < 0.5)) throw Error("grow_geodesic_patch: fraction must be in (0, 0.5)");
        const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool_.size())));
        const std::size_t source = graph_.nearest_node(seed.position);
        const auto reached = graph_.nearest_by_graph(source, count);
        if (reached.size() < count) throw Error("grow_geodesic_patch: patch exceeds component");
        Patch patch;
        patch.seed = seed;
        patch.area_fraction = static_cast<double>(count) / static_cast<double>(pool_.size());
        patch.samples.reserve(count);
        patch.pool_indices.reserve(count);
        for (const auto& r : reached) {
            patch.samples.push_back(pool_[r.node]);
            patch.pool_indices.push_back(r.node);
        }
        return patch;
    }

private:
    static const PointCloud& check_pool(const PointCloud& pool) {
        if (pool.size() < kMinPatchPool)
            throw Error("grow_geodesic_patch: pool of " + std::to_string(pool.size()) + " below minimum " +
                        std::to_string(kMinPatchPool));
        return pool;
    }

    std::vector<SurfaceSample> pool_;
    GeodesicGraph graph_;
};

inline Patch grow_geodesic_patch(const TriangleMesh& /*mesh*/, const std::vector<SurfaceSample>& pool,
                                 const SurfaceSample& seed, double fraction) {
    return PatchGrower(pool).grow(seed, fraction);
}

/// Closest point on triangle (a, b, c) to p, by Voronoi region of the triangle.
inline Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
    const Point3 ab = b - a;
    const Point3 ac = c - a;
    const Point3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Point3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Point3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_squared_distance(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
    return squared_distance(p, closest_point_on_triangle(p, a, b, c));
}

/// Bounding-volume hierarchy over mesh triangles for exact point-to-surface queries.
class SurfaceDistance {
public:
    explicit SurfaceDistance(const TriangleMesh& mesh) : mesh_(&mesh) {
        const std::size_t n = mesh.triangles().size();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        centers_.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            const auto [a, b, c] = mesh.corners(t);
            centers_.push_back((a + b + c) / 3.0);
        }
        nodes_.reserve(2 * n / kLeafSize + 2);
        build(0, n);
    }

    double squared_distance_to(const Point3& p) const {
        double best = std::numeric_limits<double>::infinity();
        query(0, p, best);
        return best;
    }

    double distance_to(const Point3& p) const { return std::sqrt(squared_distance_to(p)); }

private:
    static constexpr std::size_t kLeafSize = 4;

    struct Node {
        std::size_t begin = 0, end = 0, left = 0, right = 0;
        Point3 lo, hi;
    };

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        Node node;
        node.begin = begin;
        node.end = end;
        constexpr double inf = std::numeric_limits<double>::infinity();
        node.lo = {inf, inf, inf};
        node.hi = {-inf, -inf, -inf};
        for (std::size_t i = begin; i < end; ++i) {
            for (const auto& v : mesh_->corners(order_[i])) {
                node.lo = {std::min(node.lo.x, v.x), std::min(node.lo.y, v.y), std::min(node.lo.z, v.z)};
                node.hi = {std::max(node.hi.x, v.x), std::max(node.hi.y, v.y), std::max(node.hi.z, v.z)};
            }
        }
        if (end - begin > kLeafSize) {
            const Point3 ext = node.hi - node.lo;
            const std::size_t axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
            const std::size_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                             order_.begin() + static_cast<std::ptrdiff_t>(mid),
                             order_.begin() + static_cast<std::ptrdiff_t>(end),
                             [&](std::size_t a, std::size_t b) { return centers_[a][axis] < centers_[b][axis]; });
            node.left = build(begin, mid);
            node.right = build(mid, end);
        }
        nodes_[id] = node;
        return id;
    }

    static double box_squared_distance(const Node& n, const Point3& p) noexcept {
        const double dx = std::max({n.lo.x - p.x, 0.0, p.x - n.hi.x});
        const double dy = std::max({n.lo.y - p.y, 0.0, p.y - n.hi.y});
        const double dz = std::max({n.lo.z - p.z, 0.0, p.z - n.hi.z});
        return dx * dx + dy * dy + dz * dz;
    }

    void query(std::size_t id, const Point3& p, double& best) const {
        const Node& n = nodes_[id];
        if (n.left == 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const auto [a, b, c] = mesh_->corners(order_[i]);
                best = std::min(best, point_triangle_squared_distance(p, a, b, c));
            }
            return;
        }
        std::size_t first = n.left, second = n.right;
        double d_first = box_squared_distance(nodes_[first], p);
        double d_second = box_squared_distance(nodes_[second], p);
        if (d_second < d_first) {
            std::swap(first, second);
            std::swap(d_first, d_second);
        }
        if (d_first <= best) query(first, p, best);
        if (d_second <= best) query(second, p, best);
    }

    const TriangleMesh* mesh_;
    std::vector<std::size_t> order_;
    std::vector<Point3> centers_;
    std::vector<Node> nodes_;
};

/// Exact minimum distance from `p` to the mesh surface.
inline double point_to_surface_distance(const TriangleMesh& mesh, const Point3& p) {
    return SurfaceDistance(mesh).distance_to(p);
}

}  // namespace pugan
