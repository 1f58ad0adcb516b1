#include "mipcls/classhead.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mipcls/error.hpp"
#include "mipcls/rng.hpp"

namespace mipcls {

ClassWeights ClassWeights::uniform() {
  ClassWeights cw;
  cw.w = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return cw;
}

ClassWeights class_weights(const std::array<std::size_t, kNumClasses>& counts) {
  double inv_sum = 0.0;
  for (std::size_t n : counts) {
    if (n == 0) throw Error(ErrorCode::EmptyClass, "every class needs at least one sample");
    inv_sum += 1.0 / static_cast<double>(n);
  }
  ClassWeights cw;
  cw.counts = counts;
  for (int c = 0; c < kNumClasses; ++c) cw.w[c] = (1.0 / static_cast<double>(counts[c])) / inv_sum;
  return cw;
}

std::size_t feature_dim(std::size_t grid) noexcept { return kStackChannels * (1 + grid * grid); }

FeatureVector extract_features(const MipStack& m, std::size_t grid) {
  if (grid < 1) throw Error(ErrorCode::InvalidArgument, "grid must be >= 1");
  if (m.height < grid || m.width < grid) throw Error(ErrorCode::DimMismatch, "stack smaller than pooling grid");
  auto bounds = [grid](std::size_t extent) {
    std::vector<std::size_t> b(grid + 1);
    const std::size_t step = extent / grid;
    for (std::size_t i = 0; i < grid; ++i) b[i] = i * step;
    b[grid] = extent;
    return b;
  };
  const auto ys = bounds(m.height);
  const auto xs = bounds(m.width);

  FeatureVector f;
  f.reserve(feature_dim(grid));
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    const auto ch = m.channel(c);
    double total = 0.0;
    for (float v : ch) total += v;
    f.push_back(static_cast<float>(total / static_cast<double>(ch.size())));
    for (std::size_t gy = 0; gy < grid; ++gy) {
      for (std::size_t gx = 0; gx < grid; ++gx) {
        double s = 0.0;
        for (std::size_t y = ys[gy]; y < ys[gy + 1]; ++y) {
          for (std::size_t x = xs[gx]; x < xs[gx + 1]; ++x) s += ch[y * m.width + x];
        }
        const double n = static_cast<double>((ys[gy + 1] - ys[gy]) * (xs[gx + 1] - xs[gx]));
        f.push_back(static_cast<float>(s / n));
      }
    }
  }
  return f;
}

HeadParams HeadParams::zeros(std::size_t dim) {
  HeadParams p;
  p.dim = dim;
  p.weight.assign(dim * kNumClasses, 0.0);
  return p;
}

Probs logits(std::span<const float> f, const HeadParams& p) {
  if (f.size() != p.dim || p.weight.size() != p.dim * kNumClasses) {
    throw Error(ErrorCode::DimMismatch, "feature length does not match head");
  }
  Probs z = p.bias;
  for (std::size_t d = 0; d < p.dim; ++d) {
    const double fd = f[d];
    for (int c = 0; c < kNumClasses; ++c) z[c] += fd * p.w(d, c);
  }
  return z;
}

Probs softmax(const Probs& z) noexcept {
  const double mx = *std::max_element(z.begin(), z.end());
  Probs e{};
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    e[c] = std::exp(z[c] - mx);
    sum += e[c];
  }
  for (double& v : e) v /= sum;
  return e;
}

Probs forward(std::span<const float> f, const HeadParams& p) { return softmax(logits(f, p)); }

namespace {
void check_labels(std::span<const int> labels) {
  for (int y : labels) {
    if (y < 0 || y >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "label out of range");
  }
}
}  // namespace

double weighted_ce(std::span<const Probs> probs, std::span<const int> labels, const ClassWeights& cw) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "probs and labels differ in length");
  if (probs.empty()) return 0.0;
  check_labels(labels);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int y = labels[i];
    acc += cw.w[y] * std::log(std::max(probs[i][y], 1e-12));
  }
  return -acc / static_cast<double>(probs.size());
}

HeadGradient grad_weighted_ce(std::span<const FeatureVector> features, std::span<const int> labels,
                              const HeadParams& p, const ClassWeights& cw) {
  if (features.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "features and labels differ in length");
  check_labels(labels);
  HeadGradient g;
  g.weight.assign(p.dim * kNumClasses, 0.0);
  if (features.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Probs prob = forward(features[i], p);
    const int y = labels[i];
    Probs dz{};
    for (int c = 0; c < kNumClasses; ++c) dz[c] = cw.w[y] * (prob[c] - (c == y ? 1.0 : 0.0)) * inv_n;
    for (std::size_t d = 0; d < p.dim; ++d) {
      const double fd = features[i][d];
      for (int c = 0; c < kNumClasses; ++c) g.weight[d * kNumClasses + c] += fd * dz[c];
    }
    for (int c = 0; c < kNumClasses; ++c) g.bias[c] += dz[c];
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(epochs > warmup_epochs && warmup_epochs >= 0)) {
    throw Error(ErrorCode::InvalidArgument, "need epochs > warmup_epochs >= 0");
  }
  if (batch < 1) throw Error(ErrorCode::InvalidArgument, "batch must be >= 1");
  if (!(lr_max > lr_min && lr_min >= 0.0)) {
    // lr_max == lr_min == 0 freezes the parameters; allowed for diagnostics.
    if (!(lr_max == 0.0 && lr_min == 0.0)) throw Error(ErrorCode::InvalidArgument, "need lr_max > lr_min >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidArgument, "momentum must be in [0, 1)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},         {"batch", c.batch},     {"lr_max", c.lr_max},
       {"warmup_epochs", c.warmup_epochs}, {"lr_min", c.lr_min}, {"momentum", c.momentum},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d = c;
  c.epochs = j.value("epochs", d.epochs);
  c.batch = j.value("batch", d.batch);
  c.lr_max = j.value("lr_max", d.lr_max);
  c.warmup_epochs = j.value("warmup_epochs", d.warmup_epochs);
  c.lr_min = j.value("lr_min", d.lr_min);
  c.momentum = j.value("momentum", d.momentum);
  c.seed = j.value("seed", d.seed);
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw Error(ErrorCode::InvalidArgument, "epoch out of range");
  const int w = cfg.warmup_epochs;
  if (epoch < w) return cfg.lr_max * static_cast<double>(epoch + 1) / static_cast<double>(w);
  const int span = cfg.epochs - w - 1;
  if (span <= 0) return cfg.lr_max;
  const double t = static_cast<double>(epoch - w) / static_cast<double>(span);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

TrainResult train_head(std::span<const FeatureVector> features, std::span<const int> labels,
                       const TrainConfig& cfg, const ClassWeights& cw) {
  cfg.validate();
  if (features.empty() || features.size() != labels.size()) {
    throw Error(ErrorCode::DimMismatch, "need matching, non-empty features and labels");
  }
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) throw Error(ErrorCode::DimMismatch, "feature vectors differ in length");
  }
  check_labels(labels);

  TrainResult r{HeadParams::zeros(dim), {}};
  HeadParams& p = r.params;
  std::vector<double> vel_w(p.weight.size(), 0.0);
  Probs vel_b{0.0, 0.0, 0.0};

  const std::size_t n = features.size();
  std::vector<std::size_t> order(n);
  std::vector<FeatureVector> batch_f;
  std::vector<int> batch_y;
  std::vector<Probs> all_probs(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    const double lr = lr_schedule(epoch, cfg);
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t stop = std::min(n, start + cfg.batch);
      batch_f.clear();
      batch_y.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch_f.push_back(features[order[k]]);
        batch_y.push_back(labels[order[k]]);
      }
      const HeadGradient g = grad_weighted_ce(batch_f, batch_y, p, cw);
      for (std::size_t k = 0; k < p.weight.size(); ++k) {
        vel_w[k] = cfg.momentum * vel_w[k] + g.weight[k];
        p.weight[k] -= lr * vel_w[k];
      }
      for (int c = 0; c < kNumClasses; ++c) {
        vel_b[c] = cfg.momentum * vel_b[c] + g.bias[c];
        p.bias[c] -= lr * vel_b[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i) all_probs[i] = forward(features[i], p);
    r.loss_trace.push_back(weighted_ce(all_probs, labels, cw));
  }
  return r;
}

int argmax(const Probs& p) noexcept {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

}  // namespace mipcls
