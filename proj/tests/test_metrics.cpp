#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "support.hpp"

using namespace pugan;
using pugan::testing::brute_force_emd;
using pugan::testing::random_cloud;

namespace {

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
    auto one_way = [](const PointCloud& x, const PointCloud& y) {
        double s = 0.0;
        for (const auto& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y) best = std::min(best, distance(p, q));
            s += best;
        }
        return s / static_cast<double>(x.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

}  // namespace

TEST(Chamfer, HandValuesAndBruteForce) {
    const PointCloud a = random_cloud(30, 1), b = random_cloud(40, 2);
    EXPECT_EQ(chamfer_distance(a, a), 0.0);
    EXPECT_EQ(chamfer_distance(PointCloud{{0, 0, 0}}, PointCloud{{1, 0, 0}}), 1.0);
    EXPECT_NEAR(chamfer_distance(a, b), brute_chamfer(a, b), 1e-15);
    EXPECT_THROW(chamfer_distance(a, PointCloud{}), Error);
}

TEST(Hausdorff, HandValuesAndDominatesChamfer) {
    EXPECT_EQ(hausdorff_distance(PointCloud{{0, 0, 0}, {1, 0, 0}}, PointCloud{{0, 0, 0}}), 1.0);
    for (std::uint64_t s = 0; s < 100; ++s) {
        const PointCloud a = random_cloud(20, 10 + s), b = random_cloud(25, 500 + s);
        EXPECT_EQ(hausdorff_distance(a, a), 0.0);
        EXPECT_GE(hausdorff_distance(a, b), chamfer_distance(a, b));
    }
}

TEST(EmdExact, HandCase) {
    const PointCloud a{{0, 0, 0}, {2, 0, 0}}, b{{0, 1, 0}, {2, 1, 0}};
    const Matching m = emd_exact(a, b);
    EXPECT_NEAR(m.cost, 2.0, 1e-15);
    EXPECT_EQ(m.assignment, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(emd_exact(a, a).cost, 0.0);
}

TEST(EmdExact, MatchesFactorialBruteForce) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 7;
        const PointCloud a = random_cloud(n, rng()), b = random_cloud(n, rng());
        const Matching m = emd_exact(a, b);
        EXPECT_NEAR(m.cost, brute_force_emd(a, b), 1e-12);
        EXPECT_NEAR(matching_cost(a, b, m.assignment), m.cost, 1e-12);
        std::vector<std::size_t> sorted = m.assignment;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
    }
}

TEST(EmdExact, RejectsBadSizes) {
    EXPECT_THROW(emd_exact(random_cloud(3, 1), random_cloud(4, 2)), Error);
    EXPECT_THROW(emd_exact(random_cloud(kExactEmdLimit + 1, 1), random_cloud(kExactEmdLimit + 1, 2)), Error);
}

TEST(EmdApprox, CloseToExact) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const std::size_t n = 50 + 40 * s;
        const PointCloud a = random_cloud(n, 2 * s), b = random_cloud(n, 2 * s + 1);
        const double exact = emd_exact(a, b).cost;
        const Matching approx = emd_approx(a, b, kDefaultAuctionEpsilon);
        EXPECT_GE(approx.cost, exact - 1e-9);
        EXPECT_LE(approx.cost, exact * 1.005);
        EXPECT_NEAR(matching_cost(a, b, approx.assignment), approx.cost, 1e-9);
    }
    const PointCloud a = random_cloud(64, 9);
    EXPECT_EQ(emd_approx(a, a, 1e-3).cost, 0.0);
}

TEST(EmdApprox, InvariantToInputOrder) {
    const PointCloud a = random_cloud(200, 4), b = random_cloud(200, 5);
    std::vector<std::size_t> perm(200);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), Rng(6));
    const double c1 = emd_approx(a, b, 1e-3).cost;
    const double c2 = emd_approx(select(a, perm), b, 1e-3).cost;
    const double exact = emd_exact(a, b).cost;
    EXPECT_LE(std::abs(c1 - c2), 0.005 * exact);
}

TEST(Uniformity, HandValues) {
    EXPECT_NEAR(imbalance(20, 1024 * 0.01), (20 - 10.24) * (20 - 10.24) / 10.24, 1e-12);
    EXPECT_NEAR(imbalance(20, 10.24), 9.3025, 1e-9);
    EXPECT_NEAR(expected_spacing(0.1, 10), std::sqrt(2 * std::numbers::pi * 0.01 / (10 * std::sqrt(3.0))), 1e-15);
    EXPECT_NEAR(expected_spacing(0.1, 10), 0.06023, 5e-6);
}

TEST(Uniformity, PerfectCropScoresZero) {
    // two points at exactly d_hat, |S| = n_hat
    const double radius = 0.1;
    const double d_hat = expected_spacing(radius, 2);
    const PointCloud q{{0, 0, 0}, {d_hat, 0, 0}};
    const UniformCrop crop = make_crop(q, {0, 1}, radius, 2.0);
    EXPECT_EQ(crop.imbalance, 0.0);
    EXPECT_NEAR(clutter(q, crop), 0.0, 1e-30);
}

TEST(Uniformity, ClutterMatchesHandSum) {
    const PointCloud q{{0, 0, 0}, {0.05, 0, 0}, {0.05, 0.08, 0}};
    const UniformCrop crop = make_crop(q, {0, 1, 2}, 0.2, 1.0);
    const double dh = expected_spacing(0.2, 3);
    const double want = ((0.05 - dh) * (0.05 - dh) * 2 + (0.08 - dh) * (0.08 - dh)) / dh;
    EXPECT_NEAR(clutter(q, crop), want, 1e-15);
    EXPECT_NEAR(crop.imbalance, 4.0, 1e-15);
}

TEST(Uniformity, PatternOrdering) {
    const PointCloud hex = shapes::hexagonal_disk(625);
    const PointCloud rnd = shapes::random_disk(625, 1);
    const PointCloud clu = shapes::clustered_disk(625, 2);
    const double h = uniformity_loss_value_from(hex, 0.01, 50, 0);
    const double r = uniformity_loss_value_from(rnd, 0.01, 50, 0);
    const double c = uniformity_loss_value_from(clu, 0.01, 50, 0);
    EXPECT_LT(h, 0.5 * r);
    EXPECT_LT(r, c);
}

TEST(Uniformity, SinglePointAndDeterminism) {
    const PointCloud one{{0, 0, 0}};
    const double v = uniformity_loss_value(one, 0.01, 1, 3);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    const PointCloud q = random_cloud(300, 8);
    EXPECT_EQ(uniformity_loss_value(q, 0.01, 20, 5), uniformity_loss_value(q, 0.01, 20, 5));
}

TEST(MeshUniformityReport, PoissonBeatsRandomOnSphere) {
    const TriangleMesh sphere = shapes::icosphere(3).normalized();
    const PointCloud poisson = positions(poisson_disk_sample(sphere, 8192, 1));
    const PointCloud random = positions(area_weighted_sample(sphere, 8192, 2));
    const MeshUniformity metric(sphere, 50000, 3);
    const UniformityReport a = metric.evaluate(poisson, 200, 4);
    const UniformityReport b = metric.evaluate(random, 200, 4);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_LT(a.values[i], b.values[i]) << "p index " << i;
    EXPECT_EQ(metric.evaluate(poisson, 200, 4), a);
}

TEST(MeshUniformityReport, TinyInputIsFinite) {
    const TriangleMesh tet = shapes::tetrahedron();
    const UniformityReport r = uniformity_report_mesh(PointCloud{{0.1, 0.1, 0.1}}, tet, 1, 0);
    for (double v : r.values) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(SurfaceError, SamplesOnMeshHaveZeroError) {
    const TriangleMesh m = shapes::torus(1.0, 0.3, 20, 10);
    const PointCloud q = positions(area_weighted_sample(m, 500, 1));
    const SurfaceError e = point_to_surface(q, m);
    EXPECT_LT(e.max, 1e-12);
    EXPECT_LE(e.mean, e.max);
}

TEST(Report, ColumnLayout) {
    EvaluationRow row;
    row.model = "m";
    row.chamfer = 0.5;
    std::ostringstream out;
    write_report_row(out, row);
    const std::string line = out.str();
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9);
    EXPECT_EQ(std::string(kReportHeader).substr(0, 9), "model,CD,");
}
