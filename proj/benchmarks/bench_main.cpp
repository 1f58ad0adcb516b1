#include <benchmark/benchmark.h>

#include <random>

#include "mipcls/classhead.hpp"
#include "mipcls/evalkit.hpp"
#include "mipcls/geometry.hpp"
#include "mipcls/mipbuild.hpp"
#include "mipcls/phantom.hpp"

using namespace mipcls;

namespace {

Volume random_volume(Dims3 d, Spacing3 s) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> data(d[0] * d[1] * d[2]);
  for (auto& x : data) x = u(rng);
  Affine a = Affine::Identity();
  for (int i = 0; i < 3; ++i) a(i, i) = s[i];
  return Volume(d, s, a, std::move(data));
}

}  // namespace

// Phantom-sized acquisition onto the default 0.7 x 0.7 x 3 mm grid.
static void BM_Resample(benchmark::State& state) {
  const Volume v = random_volume({128, 128, 16}, {2.8, 2.8, 6.0});
  for (auto _ : state) benchmark::DoNotOptimize(resample(v, {0.7, 0.7, 3.0}, Interp::Trilinear));
  state.SetItemsProcessed(state.iterations() * 512 * 512 * 32);
}
BENCHMARK(BM_Resample)->Unit(benchmark::kMillisecond);

static void BM_MipZ(benchmark::State& state) {
  const Volume v = random_volume({512, 256, 32}, {0.7, 0.7, 3.0});
  for (auto _ : state) benchmark::DoNotOptimize(mip_z(v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}
BENCHMARK(BM_MipZ)->Unit(benchmark::kMillisecond);

static void BM_BuildStacks(benchmark::State& state) {
  const PhantomStudy ps = make_phantom_study(1, 0);
  const StackConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(build_stacks(ps.study, cfg));
}
BENCHMARK(BM_BuildStacks)->Unit(benchmark::kMillisecond);

static void BM_RocAucMicro(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Probs> probs(n);
  std::vector<int> truths(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = {u(rng), u(rng), u(rng)};
    truths[i] = static_cast<int>(rng() % 3);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc_micro(probs, truths));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RocAucMicro)->Range(256, 65536)->Complexity();

// One epoch-sized gradient step at the default feature dimension.
static void BM_GradientStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n;
  const std::size_t dim = feature_dim(4);
  std::vector<FeatureVector> f(10, FeatureVector(dim));
  std::vector<int> y(10);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (auto& x : f[i]) x = n(rng);
    y[i] = static_cast<int>(i % 3);
  }
  const HeadParams p = HeadParams::zeros(dim);
  const ClassWeights cw = class_weights({5, 3, 2});
  for (auto _ : state) benchmark::DoNotOptimize(grad_weighted_ce(f, y, p, cw));
}
BENCHMARK(BM_GradientStep);

static void BM_TrainHead(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n;
  const std::size_t dim = feature_dim(4);
  std::vector<FeatureVector> f(144, FeatureVector(dim));
  std::vector<int> y(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    y[i] = static_cast<int>(i % 3);
    for (auto& x : f[i]) x = n(rng) + static_cast<float>(y[i]);
  }
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train_head(f, y, cfg, ClassWeights::uniform()));
}
BENCHMARK(BM_TrainHead)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
