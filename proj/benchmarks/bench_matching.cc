#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "s2d/matching.h"
#include "s2d/parallel.h"
#include "s2d/tensor.h"

namespace {

s2d::FeatureGrid MakeGrid(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  s2d::FeatureGrid g(w, h, c);
  for (auto& v : g.mutable_data()) v = n(rng);
  for (std::size_t i = 0; i < g.num_cells(); ++i) s2d::NormalizeInPlace(g.MutableCell(i));
  return g;
}

std::vector<s2d::SparseDescriptor> MakeDescriptors(int count, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<s2d::SparseDescriptor> out(count);
  for (auto& d : out) {
    d.values.resize(c);
    for (auto& v : d.values) v = n(rng);
    s2d::NormalizeInPlace(d.values);
  }
  return out;
}

void BM_Correlate(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  const auto grid = MakeGrid(side, side, channels, 1);
  const auto descs = MakeDescriptors(1, channels, 2);
  s2d::SetNumThreads(1);
  for (auto _ : state) benchmark::DoNotOptimize(s2d::Correlate(grid, descs[0]));
  s2d::SetNumThreads(0);
  state.SetItemsProcessed(state.iterations() * grid.num_cells());
}
BENCHMARK(BM_Correlate)->Args({64, 256})->Args({128, 2304})->Unit(benchmark::kMillisecond);

void BM_CorrelateBatch(benchmark::State& state) {
  const auto grid = MakeGrid(128, 128, 2304, 1);
  const auto descs = MakeDescriptors(static_cast<int>(state.range(0)), 2304, 2);
  for (auto _ : state) benchmark::DoNotOptimize(s2d::CorrelateBatch(grid, descs));
  state.SetItemsProcessed(state.iterations() * descs.size());
}
BENCHMARK(BM_CorrelateBatch)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

s2d::CorrelationMap MakeMap(int n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  s2d::CorrelationMap m;
  m.width = n;
  m.height = 1;
  m.values.resize(n);
  for (auto& v : m.values) v = dist(rng);
  return m;
}

void BM_QuantileValue(benchmark::State& state) {
  const auto map = MakeMap(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(s2d::QuantileValue(map, 0.006));
  state.SetItemsProcessed(state.iterations() * map.values.size());
}
BENCHMARK(BM_QuantileValue)->Arg(16384)->Arg(1 << 20)->Unit(benchmark::kMicrosecond);

void BM_FullSortQuantile(benchmark::State& state) {
  const auto map = MakeMap(static_cast<int>(state.range(0)));
  const std::size_t rank = static_cast<std::size_t>(0.006 * map.values.size());
  for (auto _ : state) {
    std::vector<float> copy = map.values;
    std::sort(copy.begin(), copy.end(), std::greater<>());
    benchmark::DoNotOptimize(copy[rank]);
  }
  state.SetItemsProcessed(state.iterations() * map.values.size());
}
BENCHMARK(BM_FullSortQuantile)->Arg(16384)->Arg(1 << 20)->Unit(benchmark::kMicrosecond);

void BM_ArgmaxPeak(benchmark::State& state) {
  const auto map = MakeMap(1 << 14);
  for (auto _ : state) benchmark::DoNotOptimize(s2d::ArgmaxPeak(map));
  state.SetItemsProcessed(state.iterations() * map.values.size());
}
BENCHMARK(BM_ArgmaxPeak);

}  // namespace
