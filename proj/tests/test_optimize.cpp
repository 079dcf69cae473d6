#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "cutplane/optimize.hpp"

using namespace cutplane;

namespace {

ActionSpace discrete_linear(std::size_t count, std::size_t d, Rng& rng, std::shared_ptr<RandomLinear>& f) {
  f = std::make_shared<RandomLinear>(gen_random_linear(d, rng));
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> data(count * d);
  for (auto& v : data) v = u(rng);
  std::vector<std::string> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = std::to_string(i);
  return ActionSpace::discrete(ids, PointSet(d, data));
}

class CountingObjective : public Objective {
 public:
  explicit CountingObjective(std::size_t d) : f_(std::vector<double>(d, 1.0)) {}
  std::size_t dimension() const override { return f_.dimension(); }
  double value(std::span<const double> x) const override {
    ++evals;
    return f_.value(x);
  }
  mutable std::atomic<std::size_t> evals{0};

 private:
  RandomLinear f_;
};

}  // namespace

TEST_CASE("pairwise labels: direct counts") {
  const std::vector<double> y{0.2, 0.5, 0.9, 0.4};
  const Comparator g = [&](std::size_t a, std::size_t b) -> std::uint8_t { return y[a] < y[b] ? 1 : 0; };
  const std::vector<std::size_t> pool{0, 1, 2};
  const std::vector<std::size_t> item{3};
  CHECK(pairwise_labels_all_pairs(item, pool, g) == std::vector<std::uint8_t>{0});
  Rng rng(1);
  const std::vector<std::size_t> best{0};
  for (int i = 0; i < 20; ++i) CHECK(pairwise_labels(best, pool, g, 10, rng) == std::vector<std::uint8_t>{0});
}

TEST_CASE("all-pairs comparison reproduces exact median labels on odd batches") {
  Rng rng(2);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> y(2 * trial + 3);
    for (auto& v : y) v = normal(rng);
    std::vector<std::size_t> idx(y.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Comparator g = [&](std::size_t a, std::size_t b) -> std::uint8_t { return y[a] < y[b] ? 1 : 0; };
    const auto labels = pairwise_labels_all_pairs(idx, idx, g);
    const double alpha = median_threshold(y);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(labels[i] == (y[i] > alpha ? 1 : 0));
  }
}

namespace {

// Exact agreement of c-comparator labels with median labels for a continuous
// value distribution: the rank u of a point is uniform, and the label is a
// Binomial(c, u) count above c/2.
double expected_agreement(int c) {
  const int grid = 20000;
  double total = 0;
  for (int g = 0; g < grid; ++g) {
    const double u = (g + 0.5) / grid;
    double above = 0;
    for (int k = c / 2 + 1; k <= c; ++k) {
      above += std::exp(std::lgamma(c + 1.0) - std::lgamma(k + 1.0) - std::lgamma(c - k + 1.0) +
                        k * std::log(u) + (c - k) * std::log1p(-u));
    }
    total += u > 0.5 ? above : 1 - above;
  }
  return total / grid;
}

double measured_agreement(int c) {
  std::size_t agree = 0, total = 0;
  for (int s = 0; s < 50; ++s) {
    Rng rng(100 + s);
    const auto f = gen_random_linear(10, rng);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> y(100);
    for (auto& v : y) {
      std::vector<double> x(10);
      for (auto& e : x) e = u(rng);
      v = f.value(x);
    }
    std::vector<std::size_t> idx(100);
    std::iota(idx.begin(), idx.end(), 0);
    const Comparator g = [&](std::size_t a, std::size_t b) -> std::uint8_t { return y[a] < y[b] ? 1 : 0; };
    const auto labels = pairwise_labels(idx, idx, g, c, rng);
    const double alpha = median_threshold(y);
    for (std::size_t i = 0; i < 100; ++i) agree += labels[i] == (y[i] > alpha ? 1 : 0);
    total += 100;
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("comparison labels agree with median labels at the binomial rate") {
  // 5000 labels per c; binomial SE is below 0.005
  for (int c : {10, 20}) {
    CHECK(std::abs(measured_agreement(c) - expected_agreement(c)) <= 0.02);
  }
  CHECK(expected_agreement(10) == doctest::Approx(0.877).epsilon(1e-3));
  CHECK(measured_agreement(20) >= 0.9);
}

TEST_CASE("classify-opt accounting and trace invariants") {
  Rng rng(3);
  std::shared_ptr<RandomLinear> f;
  const auto space = discrete_linear(300, 4, rng, f);
  OptimizerConfig cfg;
  cfg.T = 5;
  cfg.n = 20;
  cfg.classifier.tree.n_trees = 20;
  const auto t = run_classify_opt(*f, space, cfg, {1, 0});
  CHECK(t.evaluations() == 20 * 6);
  CHECK(t.rounds.size() == 6);
  CHECK(!t.rounds[0].alpha);
  for (std::size_t r = 1; r < t.rounds.size(); ++r) {
    CHECK(t.rounds[r].best_so_far <= t.rounds[r - 1].best_so_far);
    CHECK(*t.rounds[r].alpha == median_threshold(t.rounds[r - 1].values));
    CHECK(*t.rounds[r].coverage >= 0.0);
    CHECK(*t.rounds[r].coverage <= 1.0);
  }
  CHECK(t.final_y == *std::min_element(t.rounds.back().values.begin(), t.rounds.back().values.end()));
}

TEST_CASE("round 0 is a uniform batch identical to the random baseline's first batch") {
  Rng rng(4);
  const auto f = gen_random_linear(3, rng);
  const auto box = ActionSpace::box({-1, -1, -1}, {1, 1, 1});
  OptimizerConfig cfg;
  cfg.T = 1;
  cfg.n = 15;
  const auto c = run_classify_opt(f, box, cfg, {5, 0});
  const auto r = run_random(f, box, 15, 1, {5, 0});
  CHECK(c.rounds[0].points == r.rounds[0].points);
}

TEST_CASE("no leakage: each threshold uses only the previous batch") {
  CountingObjective obj(2);
  const auto box = ActionSpace::box({-1, -1}, {1, 1});
  OptimizerConfig cfg;
  cfg.T = 4;
  cfg.n = 10;
  cfg.classifier.tree.n_trees = 10;
  const auto t = run_classify_opt(obj, box, cfg, {0, 0});
  CHECK(obj.evals.load() == 50);
  for (std::size_t r = 1; r < t.rounds.size(); ++r) {
    CHECK(*t.rounds[r].alpha == median_threshold(t.rounds[r - 1].values));
  }
}

TEST_CASE("oracle coverage equals the exact mass above alpha") {
  Rng rng(5);
  std::shared_ptr<RandomLinear> f;
  const auto space = discrete_linear(512, 5, rng, f);
  OptimizerConfig cfg;
  cfg.T = 6;
  cfg.n = 32;
  cfg.classifier.kind = ClassifierKind::oracle;
  cfg.log_cuts = true;
  const auto t = run_classify_opt(*f, space, cfg, {2, 0});
  const auto values = f->eval_batch(space.as_discrete().points);
  auto w = DiscreteWeights::uniform(512, 0.5);
  for (std::size_t r = 1; r < t.rounds.size(); ++r) {
    std::vector<std::uint8_t> above(512);
    for (std::size_t i = 0; i < 512; ++i) above[i] = values[i] > *t.rounds[r].alpha;
    CHECK(t.rounds[r].cuts == above);
    CHECK(*t.rounds[r].coverage == doctest::Approx(coverage(w, above)));
    w = mw_update(std::move(w), above);
  }
}

TEST_CASE("eta = 0 behaves like random search (rank-sum test)") {
  // Mann-Whitney U on final best values, normal approximation, two-sided 0.01.
  Rng rng(6);
  std::shared_ptr<RandomLinear> f;
  const auto space = discrete_linear(400, 4, rng, f);
  OptimizerConfig cfg;
  cfg.T = 4;
  cfg.n = 10;
  cfg.eta = 0.0;
  cfg.classifier.kind = ClassifierKind::oracle;
  std::vector<std::pair<double, int>> pooled;
  for (int s = 0; s < 50; ++s) {
    pooled.emplace_back(run_classify_opt(*f, space, cfg, {static_cast<std::uint64_t>(s), 0}).rounds.back().best_so_far, 0);
    pooled.emplace_back(run_random(*f, space, 10, 5, {static_cast<std::uint64_t>(s + 1000), 0}).rounds.back().best_so_far, 1);
  }
  std::sort(pooled.begin(), pooled.end());
  double rank_sum = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double mid = (i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum += pooled[k].second == 0 ? mid : 0;
    i = j;
  }
  const double u = rank_sum - 50.0 * 51 / 2;
  const double z = (u - 50.0 * 50 / 2) / std::sqrt(50.0 * 50 * 101 / 12);
  CHECK(std::abs(z) < 2.576);
}

TEST_CASE("random baselines") {
  Rng rng(7);
  std::shared_ptr<RandomLinear> f;
  const auto space = discrete_linear(200, 3, rng, f);
  const auto r = run_random(*f, space, 10, 4, {0, 0});
  CHECK(r.evaluations() == 40);
  const auto r2 = run_random2x(*f, space, 10, 4, {0, 0});
  for (const auto& round : r2.rounds) CHECK(round.values.size() == 20);
  CHECK(r2.method == "random-2x");
}

TEST_CASE("random search hits the top-k set at the order-statistic rate") {
  Rng rng(8);
  std::shared_ptr<RandomLinear> f;
  const std::size_t N = 1000, k = 10;
  const auto space = discrete_linear(N, 3, rng, f);
  auto values = f->eval_batch(space.as_discrete().points);
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = sorted[k - 1];
  const int n = 5, T = 4, runs = 2000;
  int hits = 0;
  for (int s = 0; s < runs; ++s) hits += run_random(*f, space, n, T, {static_cast<std::uint64_t>(s), 0}).rounds.back().best_so_far <= cutoff;
  const double p = 1 - std::pow(1 - double(k) / N, n * T);
  CHECK(std::abs(double(hits) / runs - p) <= 4 * std::sqrt(p * (1 - p) / runs));
}

TEST_CASE("fit failures keep the partial trace") {
  // CSS on a non-separable objective: labels from a quadratic bowl
  class Bowl : public Objective {
   public:
    std::size_t dimension() const override { return 1; }
    double value(std::span<const double> x) const override { return x[0] * x[0]; }
  } bowl;
  const auto box = ActionSpace::box({-1}, {1});
  OptimizerConfig cfg;
  cfg.T = 3;
  cfg.n = 20;
  cfg.classifier.kind = ClassifierKind::css_linear;
  const auto t = run_classify_opt(bowl, box, cfg, {0, 0});
  CHECK(t.error.find("round 1") != std::string::npos);
  CHECK(t.error.find("non-realizable") != std::string::npos);
  CHECK(t.rounds.size() == 1);
}

TEST_CASE("objective errors propagate with the round index") {
  // fails on its 75th call, inside round 1
  class Fragile : public Objective {
   public:
    std::size_t dimension() const override { return 1; }
    double value(std::span<const double> x) const override {
      if (++calls == 75) throw std::domain_error("boom");
      return x[0];
    }
    mutable std::atomic<int> calls{0};
  } fragile;
  const auto box = ActionSpace::box({-1}, {1});
  OptimizerConfig cfg;
  cfg.n = 50;
  cfg.classifier.tree.n_trees = 5;
  CHECK_THROWS_WITH(run_classify_opt(fragile, box, cfg, {0, 0}), doctest::Contains("round 1"));
}

TEST_CASE("optimizer runs are deterministic and independent of the execution policy") {
  Rng rng(9);
  const auto f = gen_linear_quadratic(4, 1.0, rng);
  const auto box = ActionSpace::box(std::vector<double>(4, -1.0), std::vector<double>(4, 1.0));
  OptimizerConfig cfg;
  cfg.T = 3;
  cfg.n = 30;
  cfg.classifier.tree.n_trees = 25;
  cfg.exec = Exec::serial;
  const auto a = trace_to_jsonl(run_classify_opt(f, box, cfg, {3, 1}));
  cfg.exec = Exec::omp;
  const auto b = trace_to_jsonl(run_classify_opt(f, box, cfg, {3, 1}));
  CHECK(a == b);
}
