#pragma once

#include <array>
#include <span>
#include <vector>

#include "wvt/common.hpp"
#include "wvt/embedder.hpp"

namespace wvt {

struct LossConfig {
  double margin = 0.1;
  std::size_t negatives = 15;  // K
  std::vector<Source> sources{kAllSources.begin(), kAllSources.end()};

  void validate() const;
};

// 1 - cos(u, v). Defined as 1 when either vector has zero norm.
double cosine_distance(std::span<const double> u, std::span<const double> v);

// Same value; also writes d/du into grad_u (zero when either norm is zero).
double cosine_distance_grad(std::span<const double> u, std::span<const double> v,
                            std::span<double> grad_u);

struct RankingLoss {
  double value = 0.0;
  Vec grad;  // d value / d pred
};

// (1/K) sum_i max(0, m + d(pred, pos) - d(pred, neg_i)); hinge subgradient is 0 at the kink.
RankingLoss ranking_loss(std::span<const double> pred, std::span<const double> pos,
                         std::span<const std::span<const double>> negs, double margin);

// One training example: raw features and pooled f_t per source (unused sources may be empty).
struct Example {
  std::span<const double> features;
  std::array<std::span<const double>, kSourceCount> text;
};

// Per example, per source: batch-local indices of its negatives.
using NegativeAssignment = std::vector<std::array<std::vector<std::size_t>, kSourceCount>>;

struct LossOutput {
  double value = 0.0;
  std::array<double, kSourceCount> per_source{};
  Vec param_grad;               // ParameterLayout of the model
  std::vector<Vec> video_grad;  // d loss / d f_v, per example
};

// Mean over examples of the per-source ranking losses, summed over config.sources,
// with gradients for every model parameter. `masks` holds one dropout scale vector
// per example; an empty span evaluates without dropout.
LossOutput batch_loss(const EmbeddingModel& model, std::span<const Example> batch,
                      const NegativeAssignment& negatives, const LossConfig& config,
                      std::span<const Vec> masks);

// Draws masks from model.rng() in train mode, then evaluates as above.
LossOutput batch_loss(EmbeddingModel& model, std::span<const Example> batch,
                      const NegativeAssignment& negatives, const LossConfig& config, Mode mode);

}  // namespace wvt
