#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "pugan/geometry.hpp"
#include "pugan/mesh.hpp"

// Procedural meshes and planar point patterns.
namespace pugan::shapes {

/// Regular tetrahedron inscribed in the unit sphere.
inline TriangleMesh tetrahedron() {
    const double s = 1.0 / std::sqrt(3.0);
    std::vector<Point3> v{{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    return TriangleMesh(std::move(v), {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

/// Icosahedron subdivided `levels` times and projected onto the unit sphere
/// (20 * 4^levels faces).
inline TriangleMesh icosphere(int levels) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Point3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                          {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p = p / norm(p);
    std::vector<Triangle> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                            {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4}, {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                            {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int l = 0; l < levels; ++l) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            Point3 m = (v[a] + v[b]) * 0.5;
            v.push_back(m / norm(m));
            const auto id = static_cast<std::uint32_t>(v.size() - 1);
            mid.emplace(key, id);
            return id;
        };
        std::vector<Triangle> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const auto a = midpoint(tri[0], tri[1]);
            const auto b = midpoint(tri[1], tri[2]);
            const auto c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    return TriangleMesh(std::move(v), std::move(f));
}

/// Regular grid over [x0, x1] x [y0, y1] at height z.
inline void add_grid(std::vector<Point3>& v, std::vector<Triangle>& f, double x0, double x1, double y0, double y1,
                     double z, int nx, int ny, bool flip = false) {
    const auto base = static_cast<std::uint32_t>(v.size());
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            v.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny, z});
    auto id = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (flip) {
                f.push_back({id(i, j), id(i, j + 1), id(i + 1, j)});
                f.push_back({id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)});
            } else {
                f.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                f.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
    }
}

/// Flat square of side `side` centred at the origin in the z=0 plane.
inline TriangleMesh square(double side, int cells) {
    std::vector<Point3> v;
    std::vector<Triangle> f;
    add_grid(v, f, -side / 2, side / 2, -side / 2, side / 2, 0.0, cells, cells);
    return TriangleMesh(std::move(v), std::move(f));
}

/// Two parallel sheets `gap` apart (z = +-gap/2) over x in [-0.5, 0.5],
/// y in [-0.25, 0.25], joined along x = 0.5 by a vertical strip.
inline TriangleMesh bent_sheet(double gap, int cells = 40) {
    std::vector<Point3> v;
    std::vector<Triangle> f;
    add_grid(v, f, -0.5, 0.5, -0.25, 0.25, gap / 2, cells, cells / 2);
    add_grid(v, f, -0.5, 0.5, -0.25, 0.25, -gap / 2, cells, cells / 2, true);
    const auto base = static_cast<std::uint32_t>(v.size());
    const int ny = cells / 2;
    for (int j = 0; j <= ny; ++j) {
        const double y = -0.25 + 0.5 * j / ny;
        v.push_back({0.5, y, gap / 2});
        v.push_back({0.5, y, -gap / 2});
    }
    for (int j = 0; j < ny; ++j) {
        const auto a = base + static_cast<std::uint32_t>(2 * j);
        f.push_back({a, a + 1, a + 2});
        f.push_back({a + 1, a + 3, a + 2});
    }
    return TriangleMesh(std::move(v), std::move(f));
}

/// Torus with major radius R and minor radius r.
inline TriangleMesh torus(double R, double r, int nu, int nv) {
    std::vector<Point3> v;
    std::vector<Triangle> f;
    for (int i = 0; i < nu; ++i) {
        const double u = 2.0 * std::numbers::pi * i / nu;
        for (int j = 0; j < nv; ++j) {
            const double w = 2.0 * std::numbers::pi * j / nv;
            v.push_back({(R + r * std::cos(w)) * std::cos(u), (R + r * std::cos(w)) * std::sin(u), r * std::sin(w)});
        }
    }
    auto id = [&](int i, int j) { return static_cast<std::uint32_t>(((i + nu) % nu) * nv + (j + nv) % nv); };
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            f.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
            f.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return TriangleMesh(std::move(v), std::move(f));
}

/// Axis-aligned cube of half-extent 1 with each face split into cells^2 quads.
inline TriangleMesh cube(int cells) {
    std::vector<Point3> v;
    std::vector<Triangle> f;
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = -1; side <= 1; side += 2) {
            std::vector<Point3> face;
            std::vector<Triangle> tris;
            add_grid(face, tris, -1, 1, -1, 1, side, cells, cells, side < 0);
            const auto base = static_cast<std::uint32_t>(v.size());
            for (auto p : face) {
                if (axis == 0) v.push_back({p.z, p.x, p.y});
                else if (axis == 1) v.push_back({p.y, p.z, p.x});
                else v.push_back(p);
            }
            for (auto t : tris) f.push_back({t[0] + base, t[1] + base, t[2] + base});
        }
    }
    return TriangleMesh(std::move(v), std::move(f));
}

// ---------------------------------------------------------------------------
// Planar point patterns in the unit disk (z = 0)

/// The `count` hexagonal-lattice sites nearest the origin, lattice spacing
/// chosen so they fill the unit disk.
inline PointCloud hexagonal_disk(std::size_t count) {
    const double s = std::sqrt(2.0 * std::numbers::pi / (static_cast<double>(count) * std::sqrt(3.0)));
    const int extent = static_cast<int>(std::ceil(1.5 / s)) + 2;
    std::vector<Point3> sites;
    for (int j = -extent; j <= extent; ++j)
        for (int i = -extent; i <= extent; ++i)
            sites.push_back({s * (i + 0.5 * j), s * (std::sqrt(3.0) / 2.0) * j, 0.0});
    std::stable_sort(sites.begin(), sites.end(),
                     [](const Point3& a, const Point3& b) { return squared_norm(a) < squared_norm(b); });
    sites.resize(count);
    return PointCloud(std::move(sites));
}

inline PointCloud random_disk(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    PointCloud out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double rad = std::sqrt(uniform01(rng));
        const double a = 2.0 * std::numbers::pi * uniform01(rng);
        out.push_back({rad * std::cos(a), rad * std::sin(a), 0.0});
    }
    return out;
}

/// Points gathered in tight Gaussian clumps around random centres.
inline PointCloud clustered_disk(std::size_t count, std::uint64_t seed, std::size_t clusters = 25,
                                 double spread = 0.04) {
    Rng rng(seed);
    const PointCloud centers = random_disk(clusters, seed ^ 0x5eedULL);
    std::normal_distribution<double> noise(0.0, spread);
    PointCloud out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Point3& c = centers[i % clusters];
        Point3 p{c.x + noise(rng), c.y + noise(rng), 0.0};
        const double n = norm(p);
        if (n > 1.0) p = p / n;
        out.push_back(p);
    }
    return out;
}

}  // namespace pugan::shapes
