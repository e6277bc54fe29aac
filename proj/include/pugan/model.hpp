#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pugan/autodiff.hpp"
#include "pugan/geometry.hpp"

namespace pugan {

using nn::Array2;
using nn::Tensor;

inline Array2 to_array(const PointCloud& cloud) {
    Array2 a(static_cast<Eigen::Index>(cloud.size()), 3);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = cloud[i].x;
        a(r, 1) = cloud[i].y;
        a(r, 2) = cloud[i].z;
    }
    return a;
}

inline PointCloud to_cloud(const Array2& a) {
    if (a.cols() != 3) throw Error("to_cloud: expected 3 columns, got " + nn::shape_of(a));
    PointCloud c;
    c.reserve(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index r = 0; r < a.rows(); ++r) c.push_back({a(r, 0), a(r, 1), a(r, 2)});
    return c;
}

struct GeneratorConfig {
    std::size_t N = 256;            // input points per patch
    std::size_t r = 4;              // upsampling rate
    Eigen::Index C = 480;           // extracted feature width
    Eigen::Index C_prime = 128;     // expansion width
    double grid_extent = 0.2;       // grid codes span [-g, g]^2
    std::size_t knn_k = 16;         // grouping neighborhood in the extractor
    Eigen::Index edge_width = 24;   // per-edge MLP width in the grouping layer
    Eigen::Index regression_hidden = 64;
    bool use_attention = true;
    bool use_up_down_up = true;
    bool use_farthest_sampling = true;
    std::size_t fps_seed_index = 0;

    /// Features generated before selection: (r+2)N with farthest sampling, rN without.
    std::size_t expansion_rate() const { return use_farthest_sampling ? r + 2 : r; }
    std::size_t output_points() const { return r * N; }
};

struct DiscriminatorConfig {
    Eigen::Index C_d = 64;
    Eigen::Index C_d_prime = 256;
    std::vector<Eigen::Index> head{256, 64, 1};
    bool use_attention = true;
};

/// Grid code of copy `i` out of `rate`: cells of a ceil(sqrt(rate))^2 grid
/// over [-g, g]^2 in row-major order (u varies fastest).
inline std::pair<double, double> grid_code(std::size_t i, std::size_t rate, double g) {
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(rate))));
    auto coord = [&](std::size_t k) {
        return side == 1 ? 0.0 : -g + 2.0 * g * static_cast<double>(k) / static_cast<double>(side - 1);
    };
    return {coord(i % side), coord(i / side)};
}

/// Grid codes for `rate` stacked copies of `n` rows ((rate*n) x 2).
inline Array2 grid_codes(std::size_t n, std::size_t rate, double g) {
    Array2 codes(static_cast<Eigen::Index>(n * rate), 2);
    for (std::size_t i = 0; i < rate; ++i) {
        const auto [u, v] = grid_code(i, rate, g);
        for (std::size_t k = 0; k < n; ++k) {
            const auto row = static_cast<Eigen::Index>(i * n + k);
            codes(row, 0) = u;
            codes(row, 1) = v;
        }
    }
    return codes;
}

/// kNN-grouping layer followed by densely connected shared-MLP blocks.
class FeatureExtractor {
public:
    static constexpr std::size_t kBlocks = 3;

    FeatureExtractor() = default;
    FeatureExtractor(nn::ParamStore& store, const std::string& name, const GeneratorConfig& cfg, Rng& rng)
        : k_(cfg.knn_k), edge_(store, name + "/edge", 3, cfg.edge_width, rng) {
        Eigen::Index in = 3 + cfg.edge_width;
        const Eigen::Index base = cfg.C / static_cast<Eigen::Index>(kBlocks);
        for (std::size_t b = 0; b < kBlocks; ++b) {
            const Eigen::Index width = b + 1 < kBlocks ? base : cfg.C - base * static_cast<Eigen::Index>(kBlocks - 1);
            blocks_.emplace_back(store, name + "/dense" + std::to_string(b), in, std::vector<Eigen::Index>{width, width},
                                 rng);
            in += width;
        }
    }

    Tensor operator()(const Tensor& points) const {
        const auto n = static_cast<std::size_t>(points.rows());
        if (n < k_) throw Error("extract_features: " + std::to_string(n) + " points fewer than k=" + std::to_string(k_));
        const PointCloud cloud = to_cloud(points.value());
        const KdTree tree(cloud);
        std::vector<std::size_t> centers, neighbors;
        centers.reserve(n * k_);
        neighbors.reserve(n * k_);
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& nb : tree.knn(cloud[i], k_)) {
                centers.push_back(i);
                neighbors.push_back(nb.index);
            }
        }
        const Tensor diff = nn::sub(nn::gather_rows(points, std::move(neighbors)), nn::gather_rows(points, std::move(centers)));
        const Tensor grouped = nn::segment_max_rows(nn::relu(edge_(diff)), static_cast<Eigen::Index>(k_));
        std::vector<Tensor> stack{nn::concat_cols({points, grouped})};
        std::vector<Tensor> outputs;
        for (const auto& block : blocks_) {
            Tensor out = block(nn::concat_cols(stack));
            stack.push_back(out);
            outputs.push_back(out);
        }
        return nn::concat_cols(outputs);
    }

private:
    std::size_t k_ = 16;
    nn::Dense edge_;
    std::vector<nn::Mlp> blocks_;
};

/// Duplicates features `rate` times, appends a distinct 2D grid code per
/// copy, then self-attention and two shared MLPs back to C'.
class UpFeature {
public:
    UpFeature() = default;
    UpFeature(nn::ParamStore& store, const std::string& name, Eigen::Index channels, std::size_t rate, double grid,
              bool attention, Rng& rng)
        : rate_(rate), grid_(grid), use_attention_(attention),
          mlp_(store, name + "/mlp", channels + 2, {channels, channels}, rng) {
        if (rate < 2) throw Error("up_feature: rate must be at least 2");
        if (attention) attention_ = nn::SelfAttention(store, name + "/attention", channels + 2, rng);
    }

    /// Duplicated features with codes appended ((rate*N) x (C'+2)).
    Tensor expand(const Tensor& features) const {
        const auto n = static_cast<std::size_t>(features.rows());
        return nn::concat_cols({nn::tile_rows(features, static_cast<Eigen::Index>(rate_)),
                                nn::constant(grid_codes(n, rate_, grid_))});
    }

    Tensor operator()(const Tensor& features) const {
        Tensor x = expand(features);
        if (use_attention_) x = attention_(x);
        return mlp_(x);
    }

    std::size_t rate() const noexcept { return rate_; }
    const nn::Mlp& mlp() const noexcept { return mlp_; }

private:
    std::size_t rate_ = 2;
    double grid_ = 0.2;
    bool use_attention_ = true;
    nn::SelfAttention attention_;
    nn::Mlp mlp_;
};

/// Row permutation that lists, for each original point n, its copies
/// n, n+N, ..., n+(rate-1)N consecutively.
inline std::vector<std::size_t> copy_grouping(std::size_t n, std::size_t rate) {
    std::vector<std::size_t> order;
    order.reserve(n * rate);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < rate; ++i) order.push_back(i * n + k);
    return order;
}

/// Groups the copies of each point into one row (N x rate*C) and regresses
/// C' channels with two shared MLPs.
class DownFeature {
public:
    DownFeature() = default;
    DownFeature(nn::ParamStore& store, const std::string& name, Eigen::Index in_channels, Eigen::Index out_channels,
                std::size_t rate, Rng& rng)
        : rate_(rate),
          mlp_(store, name + "/mlp", in_channels * static_cast<Eigen::Index>(rate), {out_channels, out_channels}, rng) {}

    Tensor regroup(const Tensor& expanded) const {
        const auto rows = static_cast<std::size_t>(expanded.rows());
        if (rows % rate_ != 0)
            throw Error("down_feature: " + std::to_string(rows) + " rows not divisible by rate " + std::to_string(rate_));
        const std::size_t n = rows / rate_;
        return nn::reshape(nn::gather_rows(expanded, copy_grouping(n, rate_)), static_cast<Eigen::Index>(n),
                           expanded.cols() * static_cast<Eigen::Index>(rate_));
    }

    Tensor operator()(const Tensor& expanded) const { return mlp_(regroup(expanded)); }

private:
    std::size_t rate_ = 2;
    nn::Mlp mlp_;
};

/// Intermediate values of one up-down-up pass.
struct UpDownUpTrace {
    Tensor f1, up, down, delta, delta_up, out;
};

/// Upsample, downsample back, upsample the residual and add it as a
/// correction. With the unit disabled only the first upsampling runs.
class UpDownUp {
public:
    UpDownUp() = default;
    UpDownUp(nn::ParamStore& store, const std::string& name, Eigen::Index channels, std::size_t rate, double grid,
             bool attention, bool enabled, Rng& rng)
        : enabled_(enabled), pre_(store, name + "/pre", channels, {channels}, rng),
          up_(store, name + "/up1", channels, rate, grid, attention, rng) {
        if (enabled) {
            down_ = DownFeature(store, name + "/down", channels, channels, rate, rng);
            up_delta_ = UpFeature(store, name + "/up2", channels, rate, grid, attention, rng);
        }
    }

    UpDownUpTrace trace(const Tensor& features) const {
        UpDownUpTrace t;
        t.f1 = pre_(features);
        t.up = up_(t.f1);
        if (!enabled_) {
            t.out = t.up;
            return t;
        }
        t.down = down_(t.up);
        t.delta = nn::sub(t.down, t.f1);
        t.delta_up = up_delta_(t.delta);
        t.out = nn::add(t.up, t.delta_up);
        return t;
    }

    Tensor operator()(const Tensor& features) const { return trace(features).out; }

    const UpFeature& up_delta() const noexcept { return up_delta_; }

private:
    bool enabled_ = true;
    nn::Mlp pre_;
    UpFeature up_;
    DownFeature down_;
    UpFeature up_delta_;
};

/// Values recorded during one generator pass.
struct GeneratorTrace {
    Tensor features;    // N x C
    Tensor reduced;     // N x C'
    Tensor expanded;    // (r+2)N x C'
    Tensor candidates;  // (r+2)N x 3
    std::vector<std::size_t> selected;
};

class Generator {
public:
    Generator(const GeneratorConfig& cfg, nn::ParamStore& store, std::uint64_t seed) : cfg_(cfg) {
        Rng rng(seed);
        extractor_ = FeatureExtractor(store, "gen/extract", cfg, rng);
        reduce_ = nn::Mlp(store, "gen/reduce", cfg.C, {cfg.C_prime}, rng);
        expansion_ = UpDownUp(store, "gen/expand", cfg.C_prime, cfg.expansion_rate(), cfg.grid_extent,
                              cfg.use_attention, cfg.use_up_down_up, rng);
        head_ = nn::Mlp(store, "gen/coords", cfg.C_prime, {cfg.regression_hidden, 3}, rng, false);
    }

    const GeneratorConfig& config() const noexcept { return cfg_; }

    /// Upsamples an N x 3 patch to rN x 3. Gradients reach only the
    /// regressed points kept by farthest sampling.
    Tensor operator()(const Tensor& input, GeneratorTrace* trace = nullptr) const {
        if (static_cast<std::size_t>(input.rows()) != cfg_.N || input.cols() != 3)
            throw Error("generate: expected " + std::to_string(cfg_.N) + "x3 input, got " + nn::shape_of(input.value()));
        GeneratorTrace local;
        GeneratorTrace& t = trace ? *trace : local;
        t.features = extractor_(input);
        t.reduced = reduce_(t.features);
        t.expanded = expansion_(t.reduced);
        t.candidates = head_(t.expanded);
        if (!cfg_.use_farthest_sampling) {
            t.selected.resize(static_cast<std::size_t>(t.candidates.rows()));
            std::iota(t.selected.begin(), t.selected.end(), std::size_t{0});
            return t.candidates;
        }
        t.selected = farthest_point_sampling(to_cloud(t.candidates.value()), cfg_.output_points(), cfg_.fps_seed_index);
        return nn::gather_rows(t.candidates, t.selected);
    }

    PointCloud generate(const PointCloud& input) const {
        nn::NoGradGuard guard;
        return to_cloud((*this)(nn::constant(to_array(input))).value());
    }

    const FeatureExtractor& extractor() const noexcept { return extractor_; }
    const UpDownUp& expansion() const noexcept { return expansion_; }

private:
    GeneratorConfig cfg_;
    FeatureExtractor extractor_;
    nn::Mlp reduce_;
    UpDownUp expansion_;
    nn::Mlp head_;
};

struct DiscriminatorTrace {
    Tensor point_features;   // rN x C_d
    Tensor combined;         // rN x 2 C_d
    Tensor global_features;  // 1 x C_d'
    Tensor logit;
};

/// PCN-style encoder with self-attention after the local/global
/// concatenation, a max-pooled global vector and a fully connected head.
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, nn::ParamStore& store, std::uint64_t seed) : cfg_(cfg) {
        Rng rng(seed);
        local_ = nn::Mlp(store, "dis/local", 3, {cfg.C_d / 2, cfg.C_d}, rng);
        if (cfg.use_attention) attention_ = nn::SelfAttention(store, "dis/attention", 2 * cfg.C_d, rng);
        global_ = nn::Mlp(store, "dis/global", 2 * cfg.C_d, {2 * cfg.C_d, cfg.C_d_prime}, rng);
        head_ = nn::Mlp(store, "dis/head", cfg.C_d_prime, cfg.head, rng, false);
    }

    const DiscriminatorConfig& config() const noexcept { return cfg_; }

    /// Confidence in (0, 1) that `points` come from the target distribution.
    Tensor operator()(const Tensor& points, DiscriminatorTrace* trace = nullptr) const {
        if (points.cols() != 3) throw Error("discriminate: expected 3 columns, got " + nn::shape_of(points.value()));
        DiscriminatorTrace local;
        DiscriminatorTrace& t = trace ? *trace : local;
        t.point_features = local_(points);
        const Tensor pooled = nn::max_over_rows(t.point_features);
        t.combined = nn::concat_cols({t.point_features, nn::tile_rows(pooled, points.rows())});
        Tensor x = cfg_.use_attention ? attention_(t.combined) : t.combined;
        t.global_features = nn::max_over_rows(global_(x));
        t.logit = head_(t.global_features);
        return nn::sigmoid(t.logit);
    }

    double confidence(const PointCloud& cloud) const {
        nn::NoGradGuard guard;
        return (*this)(nn::constant(to_array(cloud))).item();
    }

private:
    DiscriminatorConfig cfg_;
    nn::Mlp local_;
    nn::SelfAttention attention_;
    nn::Mlp global_;
    nn::Mlp head_;
};

}  // namespace pugan
