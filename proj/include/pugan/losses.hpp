#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pugan/autodiff.hpp"
#include "pugan/metrics.hpp"
#include "pugan/model.hpp"

namespace pugan {

struct LossWeights {
    double gan = 0.5;
    double rec = 100.0;
    double uni = 10.0;
};

struct UniformLossConfig {
    std::vector<double> percentages{kUniformityPercentages.begin(), kUniformityPercentages.end()};
    std::size_t seeds = 50;
    std::size_t start_index = 0;
};

/// Least-squares generator objective 1/2 (D(Q) - 1)^2.
inline Tensor adv_loss_G(const Tensor& fake_confidence) {
    return nn::scale(nn::square(nn::add_scalar(fake_confidence, -1.0)), 0.5);
}

/// Least-squares discriminator objective 1/2 (D(Q)^2 + (D(Q_hat) - 1)^2).
inline Tensor adv_loss_D(const Tensor& fake_confidence, const Tensor& real_confidence) {
    return nn::scale(nn::add(nn::square(fake_confidence), nn::square(nn::add_scalar(real_confidence, -1.0))), 0.5);
}

/// Differentiable uniformity surrogate. Seeds, subset membership, counts
/// and nearest-neighbor identities come from the current values and are
/// held constant; gradients flow through the neighbor distances, each
/// weighted by its subset's imbalance term.
inline Tensor uniform_loss(const Tensor& q, const UniformLossConfig& cfg = {}) {
    const PointCloud cloud = to_cloud(q.value());
    std::vector<std::size_t> from, to;
    std::vector<double> target, weight;
    for (double p : cfg.percentages) {
        for (const auto& crop : uniform_crops(cloud, p, cfg.seeds, cfg.start_index)) {
            if (crop.members.size() < 2) continue;
            for (std::size_t k = 0; k < crop.members.size(); ++k) {
                from.push_back(crop.members[k]);
                to.push_back(crop.nearest[k]);
                target.push_back(crop.spacing);
                weight.push_back(crop.imbalance / crop.spacing);
            }
        }
    }
    if (from.empty()) return nn::scale(nn::sum_all(q), 0.0);
    const auto pairs = static_cast<Eigen::Index>(from.size());
    const Tensor d = nn::row_norm(nn::sub(nn::gather_rows(q, std::move(from)), nn::gather_rows(q, std::move(to))));
    const Tensor dev = nn::sub(d, nn::constant(Eigen::Map<const Array2>(target.data(), pairs, 1)));
    return nn::sum_all(nn::mul(nn::square(dev), nn::constant(Eigen::Map<const Array2>(weight.data(), pairs, 1))));
}

enum class MatchingSolver { Auction, Exact };

/// Sum of distances under the optimal bijection, the bijection computed on
/// the current values and held constant.
inline Tensor reconstruction_loss(const Tensor& q, const PointCloud& target,
                                  MatchingSolver solver = MatchingSolver::Auction,
                                  double epsilon = kDefaultAuctionEpsilon) {
    if (static_cast<std::size_t>(q.rows()) != target.size())
        throw Error("reconstruction_loss: size mismatch (" + std::to_string(q.rows()) + " vs " +
                    std::to_string(target.size()) + ")");
    const PointCloud cloud = to_cloud(q.value());
    const Matching m = solver == MatchingSolver::Exact ? emd_exact(cloud, target) : emd_approx(cloud, target, epsilon);
    const Tensor matched = nn::constant(to_array(select(target, m.assignment)));
    return nn::sum_all(nn::row_norm(nn::sub(q, matched)));
}

/// Weighted generator objective.
inline Tensor compound_G(const Tensor& adv, const Tensor& rec, const Tensor& uni, const LossWeights& w) {
    return nn::add(nn::add(nn::scale(adv, w.gan), nn::scale(rec, w.rec)), nn::scale(uni, w.uni));
}

}  // namespace pugan
