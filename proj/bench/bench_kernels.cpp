// Parallel kernels against their serial references on 64^3 volumes.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <vector>

#include "evfuse/evidence.hpp"
#include "evfuse/fusion.hpp"
#include "evfuse/mixing.hpp"
#include "evfuse/reference.hpp"
#include "evfuse/uncertainty.hpp"
#include "evfuse/vwal.hpp"

using namespace evfuse;

namespace {

constexpr Extent3 kExtent{64, 64, 64};
constexpr std::size_t kClasses = 2;

VoxelGrid random_grid(std::vector<std::size_t> shape, std::uint64_t seed, float lo, float hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<float> data(n);
  for (auto& v : data) v = d(rng);
  return VoxelGrid(std::move(shape), std::move(data));
}

struct Inputs {
  VoxelGrid logits = random_grid({64, 64, 64, kClasses}, 1, -4.0f, 4.0f);
  BeliefVolume a = evidence_to_belief(logits);
  BeliefVolume b = evidence_to_belief(random_grid({64, 64, 64, kClasses}, 2, -4.0f, 4.0f));
  UncertaintyVolume u = uncertainty_volume(fuse_volumes(a, b));
  VoxelGrid loss = random_grid({64, 64, 64}, 3, 0.0f, 2.0f);
  MixMask mask = generate_mask(kExtent, {32, 32, 32}, 4);
};

const Inputs& inputs() {
  static const Inputs in;
  return in;
}

template <bool Parallel>
void BM_evidence(benchmark::State& st) {
  for (auto _ : st) {
    benchmark::DoNotOptimize(Parallel ? evidence_to_belief(inputs().logits) : reference::evidence_to_belief(inputs().logits));
  }
}

template <bool Parallel>
void BM_fuse(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? fuse_volumes(in.a, in.b) : reference::fuse_volumes(in.a, in.b));
}

template <bool Parallel>
void BM_uncertainty(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? uncertainty_volume(in.a) : reference::uncertainty_volume(in.a));
}

template <bool Parallel>
void BM_mix(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) {
    benchmark::DoNotOptimize(Parallel ? mix_pair(in.a.grid(), in.b.grid(), in.mask)
                                      : reference::mix_pair(in.a.grid(), in.b.grid(), in.mask));
  }
}

template <bool Parallel>
void BM_weighted_loss(benchmark::State& st) {
  const auto& in = inputs();
  const WeightSchedule s{1.0, 3, 10};
  for (auto _ : st) {
    benchmark::DoNotOptimize(Parallel ? weighted_loss(in.loss, in.u, s) : reference::weighted_loss(in.loss, in.u, s));
  }
}

}  // namespace

BENCHMARK(BM_evidence<false>)->Name("evidence_to_belief/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evidence<true>)->Name("evidence_to_belief/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fuse<false>)->Name("fuse_volumes/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fuse<true>)->Name("fuse_volumes/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_uncertainty<false>)->Name("uncertainty_volume/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_uncertainty<true>)->Name("uncertainty_volume/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mix<false>)->Name("mix_pair/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mix<true>)->Name("mix_pair/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weighted_loss<false>)->Name("weighted_loss/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weighted_loss<true>)->Name("weighted_loss/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
