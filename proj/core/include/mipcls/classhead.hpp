#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mipcls/labels.hpp"
#include "mipcls/mipbuild.hpp"

namespace mipcls {

using Probs = std::array<double, kNumClasses>;

/// Inverse-frequency class weights, normalized to sum to one.
struct ClassWeights {
  std::array<double, kNumClasses> w{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<std::size_t, kNumClasses> counts{0, 0, 0};

  /// "Natural" weighting: plain cross-entropy with w_c = 1/C.
  static ClassWeights uniform();
};

/// w_c = (1 / N_c) / sum_i (1 / N_i). Throws EmptyClass when any N_c is 0.
ClassWeights class_weights(const std::array<std::size_t, kNumClasses>& counts);

using FeatureVector = std::vector<float>;

/// Feature length for grid size g: 4 * (1 + g*g).
std::size_t feature_dim(std::size_t grid) noexcept;

/// Per channel: the global mean followed by the g x g cell means (row-major
/// cells), channel-major. Cell boundaries use floor(extent / g) per cell
/// with the remainder added to the last cell along each axis.
FeatureVector extract_features(const MipStack& m, std::size_t grid = 4);

/// Linear layer parameters: logits = W^T f + b, W stored row-major D x 3.
struct HeadParams {
  std::size_t dim = 0;
  std::vector<double> weight;  // dim * kNumClasses
  Probs bias{0.0, 0.0, 0.0};

  static HeadParams zeros(std::size_t dim);
  double& w(std::size_t d, std::size_t c) { return weight[d * kNumClasses + c]; }
  double w(std::size_t d, std::size_t c) const { return weight[d * kNumClasses + c]; }
};

Probs logits(std::span<const float> f, const HeadParams& p);
/// Max-subtracted softmax.
Probs softmax(const Probs& z) noexcept;
Probs forward(std::span<const float> f, const HeadParams& p);

/// -(1/N) sum_i w_{y_i} log(max(p_{i,y_i}, 1e-12)).
double weighted_ce(std::span<const Probs> probs, std::span<const int> labels, const ClassWeights& cw);

struct HeadGradient {
  std::vector<double> weight;
  Probs bias{0.0, 0.0, 0.0};
};

/// Analytic gradient of weighted_ce(forward(.)) w.r.t. W and b:
/// dz_i = w_{y_i} (p_i - e_{y_i}) / N, dW = sum_i f_i dz_i^T, db = sum_i dz_i.
HeadGradient grad_weighted_ce(std::span<const FeatureVector> features, std::span<const int> labels,
                              const HeadParams& p, const ClassWeights& cw);

struct TrainConfig {
  int epochs = 300;
  std::size_t batch = 10;
  double lr_max = 1e-4;
  int warmup_epochs = 5;
  double lr_min = 0.0;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Linear warm-up for warmup_epochs, then cosine annealing to lr_min at the
/// last epoch.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct TrainResult {
  HeadParams params;
  std::vector<double> loss_trace;  // training-set loss after each epoch
};

/// Momentum SGD on shuffled mini-batches, params initialised to zero. The
/// shuffle for epoch e uses CounterRng(cfg.seed, e).
TrainResult train_head(std::span<const FeatureVector> features, std::span<const int> labels,
                       const TrainConfig& cfg, const ClassWeights& cw);

int argmax(const Probs& p) noexcept;

}  // namespace mipcls
