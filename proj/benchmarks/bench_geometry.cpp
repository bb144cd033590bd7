#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "recd/geometry.hpp"
#include "recd/softlabel.hpp"

namespace {

std::vector<recd::BBox> random_boxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 1200.0), size(10.0, 150.0);
  std::vector<recd::BBox> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = pos(rng), t = pos(rng) * 0.3;
    const double h = size(rng);
    out.emplace_back(l, t, l + 0.4 * h, t + h);
  }
  return out;
}

void BM_Iou(benchmark::State& state) {
  const auto boxes = random_boxes(1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recd::iou(boxes[i & 1023], boxes[(i + 1) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_Nms(benchmark::State& state) {
  const auto boxes = random_boxes(static_cast<std::size_t>(state.range(0)), 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<recd::ScoredBox> scored;
  for (const auto& b : boxes) scored.push_back({b, score(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(recd::nms(scored, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nms)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_GreedyMatch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_boxes(n, 4);
  auto b = random_boxes(n, 5);
  for (std::size_t i = 0; i < n / 2; ++i) b[i] = a[i];
  for (auto _ : state) benchmark::DoNotOptimize(recd::greedy_match(a, b, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GreedyMatch)->RangeMultiplier(4)->Range(4, 256)->Complexity();

void BM_Wilson(benchmark::State& state) {
  int k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recd::wilson_interval(k % 23, 22));
    ++k;
  }
}
BENCHMARK(BM_Wilson);

}  // namespace
BENCHMARK_MAIN();
