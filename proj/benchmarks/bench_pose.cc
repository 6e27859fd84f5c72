#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "s2d/geometry.h"
#include "s2d/pose.h"

namespace {

const s2d::Intrinsics kK{500.0, 500.0, 256.0, 256.0};

s2d::Landmark VisiblePoint(std::mt19937_64& rng, const s2d::Pose& pose) {
  std::uniform_real_distribution<double> px(0.0, 511.0);
  std::uniform_real_distribution<double> depth(7.0, 17.0);
  const s2d::Vector3d ray = s2d::Bearing(kK, {px(rng), px(rng)});
  return pose.R.transpose() * (ray / ray.z() * depth(rng) - pose.t);
}

std::vector<s2d::Correspondence2D3D> Scene(int n, double outlier_ratio, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const s2d::Pose pose = s2d::LookAt({12.0, 1.0, 0.5}, s2d::Vector3d::Zero());
  std::uniform_real_distribution<double> pixel(0.0, 512.0);
  std::vector<s2d::Correspondence2D3D> out;
  for (int i = 0; i < n; ++i) {
    const s2d::Landmark x = VisiblePoint(rng, pose);
    const bool outlier = i < static_cast<int>(outlier_ratio * n);
    out.push_back({outlier ? s2d::PixelPoint{pixel(rng), pixel(rng)} : s2d::Project(pose, kK, x), x});
  }
  return out;
}

void BM_SolveP3P(benchmark::State& state) {
  const auto c = Scene(3, 0.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(s2d::SolveP3P(c[0], c[1], c[2], kK));
}
BENCHMARK(BM_SolveP3P);

void BM_RansacPnp(benchmark::State& state) {
  const auto c = Scene(static_cast<int>(state.range(0)), state.range(1) / 100.0, 2);
  s2d::RansacConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(s2d::RansacPnp(c, kK, cfg));
}
BENCHMARK(BM_RansacPnp)->Args({100, 0})->Args({100, 40})->Args({500, 70})
    ->Unit(benchmark::kMillisecond);

void BM_RefinePose(benchmark::State& state) {
  auto c = Scene(100, 0.0, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::mt19937_64 rng(4);
  for (auto& ci : c) ci.pixel.x += noise(rng);
  s2d::Pose init = s2d::LookAt({12.1, 1.0, 0.5}, s2d::Vector3d::Zero());
  for (auto _ : state) benchmark::DoNotOptimize(s2d::RefinePose(init, c, kK));
}
BENCHMARK(BM_RefinePose)->Unit(benchmark::kMicrosecond);

}  // namespace
