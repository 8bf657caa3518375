// Serial reference vs OpenMP kernels on one mini-batch worth of data:
// 8 clips x 500 frames x 25 classes, D=16, H=32, w=5.

#include <benchmark/benchmark.h>

#include <random>

#include "sedloss/losses.hpp"
#include "sedloss/model.hpp"

namespace {

using namespace sedloss;

constexpr std::size_t kFrames = 4000;
constexpr std::size_t kClasses = 25;

struct LossInputs {
  PredictionGrid y;
  LabelGrid z;
  ClassFrequency freq;
};

const LossInputs& loss_inputs() {
  static const LossInputs in = [] {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1e-3, 1.0 - 1e-3);
    std::bernoulli_distribution b(0.04);
    Matrix y(kFrames, kClasses);
    LabelGrid z(kFrames, kClasses);
    for (std::size_t n = 0; n < kFrames; ++n) {
      for (std::size_t m = 0; m < kClasses; ++m) {
        y(n, m) = u(rng);
        z.set(n, m, b(rng));
      }
    }
    auto freq = class_frequency_counts(std::vector<LabelGrid>{z});
    return LossInputs{PredictionGrid(std::move(y)), std::move(z), std::move(freq)};
  }();
  return in;
}

void BM_AflSerial(benchmark::State& state) {
  const auto& in = loss_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(serial::afl_loss(in.y, in.z, 0.0625, 1.0));
}
BENCHMARK(BM_AflSerial);

void BM_AflParallel(benchmark::State& state) {
  const auto& in = loss_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(afl_loss(in.y, in.z, 0.0625, 1.0));
}
BENCHMARK(BM_AflParallel);

void BM_IflSerial(benchmark::State& state) {
  const auto& in = loss_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(serial::ifl_loss(in.y, in.z, 1.0, 500.0, in.freq));
}
BENCHMARK(BM_IflSerial);

void BM_IflParallel(benchmark::State& state) {
  const auto& in = loss_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(ifl_loss(in.y, in.z, 1.0, 500.0, in.freq));
}
BENCHMARK(BM_IflParallel);

void BM_FbtlSerial(benchmark::State& state) {
  const auto& in = loss_inputs();
  const std::vector<PredictionGrid> ys{in.y};
  const std::vector<LabelGrid> zs{in.z};
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::fbtl_loss(ys, zs, 0.6, 0.4, 0.001, 1.0));
  }
}
BENCHMARK(BM_FbtlSerial);

void BM_FbtlParallel(benchmark::State& state) {
  const auto& in = loss_inputs();
  const std::vector<PredictionGrid> ys{in.y};
  const std::vector<LabelGrid> zs{in.z};
  for (auto _ : state) benchmark::DoNotOptimize(fbtl_loss(ys, zs, 0.6, 0.4, 0.001, 1.0));
}
BENCHMARK(BM_FbtlParallel);

struct ModelInputs {
  ModelParams params;
  FeatureGrid x;
  Matrix upstream;
};

const ModelInputs& model_inputs() {
  static const ModelInputs in = [] {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    ModelInputs m{init_params(3, ModelDims{}), FeatureGrid(500, 16), Matrix(500, 25)};
    for (double& v : m.x.flat()) v = g(rng);
    for (double& v : m.upstream.flat()) v = g(rng);
    return m;
  }();
  return in;
}

void BM_ForwardSerial(benchmark::State& state) {
  const auto& in = model_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(serial::forward(in.params, in.x));
}
BENCHMARK(BM_ForwardSerial);

void BM_ForwardParallel(benchmark::State& state) {
  const auto& in = model_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(forward(in.params, in.x));
}
BENCHMARK(BM_ForwardParallel);

void BM_BackwardSerial(benchmark::State& state) {
  const auto& in = model_inputs();
  const auto cache = serial::forward(in.params, in.x).second;
  for (auto _ : state) benchmark::DoNotOptimize(serial::backward(in.params, cache, in.upstream));
}
BENCHMARK(BM_BackwardSerial);

void BM_BackwardParallel(benchmark::State& state) {
  const auto& in = model_inputs();
  const auto cache = forward(in.params, in.x).second;
  for (auto _ : state) benchmark::DoNotOptimize(backward(in.params, cache, in.upstream));
}
BENCHMARK(BM_BackwardParallel);

}  // namespace

BENCHMARK_MAIN();
