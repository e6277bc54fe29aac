#include <gtest/gtest.h>

#include "support.hpp"

using namespace pugan;
using pugan::testing::gradient_error;
using pugan::testing::random_cloud;

namespace {

Tensor scalar(double v, bool trainable = false) {
    Array2 a(1, 1);
    a(0, 0) = v;
    return trainable ? nn::variable(a) : nn::constant(a);
}

// Points spread through the unit ball, like a normalized patch.
PointCloud ball_cloud(std::size_t n, std::uint64_t seed) {
    PointCloud c;
    Rng rng(seed);
    while (c.size() < n) {
        const Point3 p{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
        if (squared_norm(p) <= 1.0) c.push_back(p);
    }
    return c;
}

}  // namespace

TEST(AdversarialLoss, HandValues) {
    EXPECT_EQ(adv_loss_G(scalar(1.0)).item(), 0.0);
    EXPECT_EQ(adv_loss_G(scalar(0.0)).item(), 0.5);
    Tensor d = scalar(0.5, true);
    nn::backward(adv_loss_G(d));
    EXPECT_DOUBLE_EQ(d.grad()(0, 0), -0.5);

    EXPECT_EQ(adv_loss_D(scalar(0.0), scalar(1.0)).item(), 0.0);
    EXPECT_EQ(adv_loss_D(scalar(0.5), scalar(0.5)).item(), 0.25);
    EXPECT_EQ(adv_loss_D(scalar(1.0), scalar(0.0)).item(), 1.0);
}

TEST(AdversarialLoss, Gradients) {
    Tensor f = scalar(0.3, true), r = scalar(0.8, true);
    EXPECT_LT(gradient_error([&] { return adv_loss_G(f); }, {f}), 1e-3);
    EXPECT_LT(gradient_error([&] { return adv_loss_D(f, r); }, {f, r}), 1e-3);
}

TEST(UniformLoss, MatchesMetricOnFrozenInput) {
    const PointCloud q = ball_cloud(256, 1);
    const UniformLossConfig cfg;
    double want = 0.0;
    for (double p : cfg.percentages) want += uniformity_loss_value_from(q, p, cfg.seeds, cfg.start_index);
    const double got = uniform_loss(nn::constant(to_array(q)), cfg).item();
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want));
}

TEST(UniformLoss, Gradient) {
    Tensor q = nn::variable(to_array(ball_cloud(64, 2)));
    UniformLossConfig cfg;
    cfg.seeds = 10;
    EXPECT_LT(gradient_error([&] { return uniform_loss(q, cfg); }, {q}), 1e-3);
}

TEST(UniformLoss, PushesCrowdedPairApart) {
    Array2 pts(2, 3);
    pts << 0, 0, 0, 0.01, 0, 0;
    Tensor q = nn::variable(pts);
    UniformLossConfig cfg;
    cfg.percentages = {0.01};
    cfg.seeds = 1;
    nn::backward(uniform_loss(q, cfg));
    // descending the gradient moves point 1 toward +x and point 0 toward -x
    EXPECT_LT(q.grad()(1, 0), 0.0);
    EXPECT_GT(q.grad()(0, 0), 0.0);
    EXPECT_LT(gradient_error([&] { return uniform_loss(q, cfg); }, {q}), 1e-3);
}

TEST(UniformLoss, HexagonalBelowRandom) {
    UniformLossConfig cfg;
    const double hex = uniform_loss(nn::constant(to_array(shapes::hexagonal_disk(625))), cfg).item();
    const double rnd = uniform_loss(nn::constant(to_array(shapes::random_disk(625, 3))), cfg).item();
    EXPECT_LT(hex, rnd);
}

TEST(ReconstructionLoss, HandCaseAndIdentity) {
    const PointCloud a{{0, 0, 0}, {2, 0, 0}}, b{{0, 1, 0}, {2, 1, 0}};
    EXPECT_NEAR(reconstruction_loss(nn::constant(to_array(a)), b, MatchingSolver::Exact).item(), 2.0, 1e-15);
    EXPECT_NEAR(reconstruction_loss(nn::constant(to_array(a)), b).item(), 2.0, 1e-12);
    const PointCloud c = random_cloud(30, 4);
    EXPECT_EQ(reconstruction_loss(nn::constant(to_array(c)), c).item(), 0.0);
    EXPECT_THROW(reconstruction_loss(nn::constant(to_array(c)), a), Error);
}

TEST(ReconstructionLoss, GradientIsUnitVectorAwayFromMatch) {
    const PointCloud target = random_cloud(20, 5);
    Tensor q = nn::variable(to_array(random_cloud(20, 6)));
    EXPECT_LT(gradient_error([&] { return reconstruction_loss(q, target, MatchingSolver::Exact); }, {q}), 1e-3);
    const Matching m = emd_exact(to_cloud(q.value()), target);
    nn::backward(reconstruction_loss(q, target, MatchingSolver::Exact));
    for (std::size_t i = 0; i < 20; ++i) {
        const Point3 d = to_cloud(q.value())[i] - target[m.assignment[i]];
        const Point3 g{q.grad()(i, 0), q.grad()(i, 1), q.grad()(i, 2)};
        EXPECT_NEAR(distance(g, d / norm(d)), 0.0, 1e-12);
    }
}

TEST(CompoundLoss, Weights) {
    const LossWeights full;
    EXPECT_NEAR(compound_G(scalar(0.5), scalar(0.01), scalar(0.02), full).item(), 1.45, 1e-12);
    EXPECT_EQ(compound_G(scalar(0), scalar(0), scalar(0), full).item(), 0.0);
    EXPECT_EQ(compound_G(scalar(3), scalar(2), scalar(1), LossWeights{0, 0, 0}).item(), 0.0);
    Tensor a = scalar(0.2, true), r = scalar(0.4, true), u = scalar(0.7, true);
    EXPECT_LT(gradient_error([&] { return compound_G(a, r, u, full); }, {a, r, u}), 1e-3);
}
