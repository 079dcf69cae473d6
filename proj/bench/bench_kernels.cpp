// Serial reference paths against their OpenMP counterparts. The benchmark
// argument selects the path: 0 = serial, 1 = OpenMP.
#include <benchmark/benchmark.h>

#include "cutplane/classify.hpp"
#include "cutplane/objectives.hpp"
#include "cutplane/sample.hpp"
#include "cutplane/theory.hpp"

using namespace cutplane;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::omp; }

PointSet uniform_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return draw_uniform_box(BoxSpace{std::vector<double>(d, -1.0), std::vector<double>(d, 1.0)}, n, rng);
}

LabeledSet linear_labels(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const auto f = gen_random_linear(d, rng);
  LabeledSet data;
  data.features = uniform_points(n, d, seed + 1);
  const auto y = f.eval_batch(data.features, Exec::serial);
  data.alpha = median_threshold(y);
  for (double v : y) data.labels.push_back(v > data.alpha ? 1 : 0);
  return data;
}

void BM_MixtureDensity(benchmark::State& state) {
  const std::size_t d = 10;
  const auto candidates = uniform_points(10000, d, 1);
  const auto centers = uniform_points(1000, d, 2);
  const std::vector<double> bw(d, 0.6);
  const BoxSpace box{std::vector<double>(d, -1.0), std::vector<double>(d, 1.0)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixture_log_density(candidates, centers, bw, box, exec_of(state)));
  }
}
BENCHMARK(BM_MixtureDensity)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TreeEnsembleFit(benchmark::State& state) {
  const auto data = linear_labels(1000, 10, 3);
  for (auto _ : state) {
    TreeEnsemble forest({}, exec_of(state));
    Rng rng(4);
    forest.fit(data, rng);
    benchmark::DoNotOptimize(forest);
  }
}
BENCHMARK(BM_TreeEnsembleFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TreeEnsembleDecide(benchmark::State& state) {
  const auto data = linear_labels(1000, 10, 5);
  TreeEnsemble forest;
  Rng rng(6);
  forest.fit(data, rng);
  const auto probes = uniform_points(20000, 10, 7);
  for (auto _ : state) benchmark::DoNotOptimize(forest.decide_batch(probes, exec_of(state)));
}
BENCHMARK(BM_TreeEnsembleDecide)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MultiplierBootstrap(benchmark::State& state) {
  const auto data = linear_labels(500, 5, 8);
  BootstrapLinearConfig cfg;
  for (auto _ : state) {
    Rng rng(9);
    benchmark::DoNotOptimize(multiplier_bootstrap(data, cfg, rng, exec_of(state)));
  }
}
BENCHMARK(BM_MultiplierBootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DiscreteUpdate(benchmark::State& state) {
  Rng rng(10);
  const auto f = gen_random_linear(8, rng);
  const auto points = uniform_points(65536, 8, 11);
  const auto y = f.eval_batch(points, Exec::serial);
  OracleSublevel h([&](std::span<const double> x) { return f.value(x); }, median_threshold(y));
  for (auto _ : state) {
    auto w = DiscreteWeights::uniform(points.size(), 0.5);
    benchmark::DoNotOptimize(mw_update(std::move(w), h, points, exec_of(state)));
  }
}
BENCHMARK(BM_DiscreteUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvalBatch(benchmark::State& state) {
  const Hartmann6 f;
  Rng rng(12);
  const auto points = draw_uniform_box(BoxSpace{std::vector<double>(6, 0.0), std::vector<double>(6, 1.0)}, 100000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(f.eval_batch(points, exec_of(state)));
}
BENCHMARK(BM_EvalBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ChisqBall(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mc_chisq_ball(10, 20, 3.0, 100000, 13, exec_of(state)));
}
BENCHMARK(BM_ChisqBall)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
