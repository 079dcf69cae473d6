#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cutplane/objectives.hpp"

using namespace cutplane;

namespace {

// Projected gradient descent with numerical or analytic gradient on a box.
template <class F, class G>
std::vector<double> projected_descent(F f, G grad, std::vector<double> x, double lo, double hi, int iters,
                                      double step) {
  for (int k = 0; k < iters; ++k) {
    const auto g = grad(x);
    auto trial = x;
    double s = step;
    for (int ls = 0; ls < 30; ++ls) {
      for (std::size_t j = 0; j < x.size(); ++j) trial[j] = std::clamp(x[j] - s * g[j], lo, hi);
      if (f(trial) <= f(x)) break;
      s *= 0.5;
    }
    x = trial;
  }
  return x;
}

std::vector<double> numeric_grad(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                                 double lo, double hi) {
  std::vector<double> g(x.size());
  const double h = 1e-6;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto a = x, b = x;
    a[j] = std::min(hi, x[j] + h);
    b[j] = std::max(lo, x[j] - h);
    g[j] = (f(a) - f(b)) / (a[j] - b[j]);
  }
  return g;
}

}  // namespace

TEST_CASE("random linear minimum by sign formula") {
  RandomLinear one({1.0});
  CHECK(one.value(std::vector<double>{-1.0}) == -1.0);
  CHECK(one.minimum() == -1.0);

  RandomLinear two({0.6, 0.8});
  CHECK(two.minimum() == doctest::Approx(-1.4));
  CHECK(two.minimizer() == std::vector<double>{-1.0, -1.0});
  CHECK(two.value(two.minimizer()) == doctest::Approx(-1.4));
}

TEST_CASE("gen_random_linear: unit weights and no sample beats the analytic minimum") {
  Rng rng(1);
  const auto f = gen_random_linear(300, rng);
  double norm = 0;
  for (double w : f.weights()) norm += w * w;
  CHECK(norm == doctest::Approx(1.0));
  const double fmin = f.minimum();
  CHECK(f.value(f.minimizer()) == doctest::Approx(fmin));
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(300);
  double best = INFINITY;
  for (int i = 0; i < 1000000 / 100; ++i) {  // 10^4 samples: the envelope stays far above
    for (auto& v : x) v = u(rng);
    best = std::min(best, f.value(x));
  }
  CHECK(best > fmin);
}

TEST_CASE("linear-quadratic construction") {
  Rng a(4), b(4);
  const auto lq0 = gen_linear_quadratic(5, 0.0, a);
  const auto lin = gen_random_linear(5, b);
  Rng probe(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = u(probe);
    CHECK(lq0.value(x) == doctest::Approx(lin.value(x)).epsilon(1e-14));
    CHECK(lq0.quadratic_part(x) >= 0.0);
  }
}

TEST_CASE("linear-quadratic gradient agrees with finite differences") {
  Rng rng(8);
  const auto f = gen_linear_quadratic(6, 1.0, rng);
  std::vector<double> x{0.1, -0.3, 0.5, 0.2, -0.7, 0.0};
  const auto g = f.gradient(x);
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto p = x, m = x;
    p[j] += 1e-6;
    m[j] -= 1e-6;
    CHECK(g[j] == doctest::Approx((f.value(p) - f.value(m)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("linear-quadratic minimum via multi-start projected descent") {
  Rng rng(10);
  const auto f = gen_linear_quadratic(10, 1.0, rng);
  auto fv = [&](const std::vector<double>& x) { return f.value(x); };
  auto gr = [&](const std::vector<double>& x) { return f.gradient(x); };
  std::uniform_real_distribution<double> u(-1, 1);
  double best = INFINITY;
  std::vector<double> runs;
  for (int s = 0; s < 100; ++s) {
    std::vector<double> x0(10);
    for (auto& v : x0) v = u(rng);
    const auto x = projected_descent(fv, gr, x0, -1, 1, 300, 0.5);
    runs.push_back(f.value(x));
    best = std::min(best, runs.back());
  }
  // Convex: every start lands on the same minimum.
  for (double v : runs) CHECK(v == doctest::Approx(best).epsilon(1e-5));
  std::vector<double> x(10);
  for (int i = 0; i < 20000; ++i) {
    for (auto& v : x) v = u(rng);
    CHECK(f.value(x) >= best - 1e-9);
  }
}

TEST_CASE("shekel4 reference values") {
  const std::vector<double> c{4, 4, 4, 4};
  CHECK(shekel4(c) == doctest::Approx(-10.5364).epsilon(1e-4));
  // local descent does not find anything much lower nearby
  std::function<double(std::span<const double>)> f = shekel4;
  auto fv = [&](const std::vector<double>& x) { return shekel4(x); };
  auto gr = [&](const std::vector<double>& x) { return numeric_grad(f, x, 0, 10); };
  const auto x = projected_descent(fv, gr, c, 0, 10, 200, 0.1);
  CHECK(shekel4(x) == doctest::Approx(-10.5364).epsilon(1e-4));
  const double far = shekel4(std::vector<double>{10, 10, 10, 10});
  CHECK(far < 0.0);
  CHECK(far > -0.2);
  CHECK_THROWS_AS(shekel4(std::vector<double>{11, 0, 0, 0}), std::domain_error);
}

TEST_CASE("hartmann6 global minimum by random search and local descent") {
  Rng rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::function<double(std::span<const double>)> f = hartmann6;
  auto fv = [&](const std::vector<double>& x) { return hartmann6(x); };
  auto gr = [&](const std::vector<double>& x) { return numeric_grad(f, x, 0, 1); };
  std::vector<std::pair<double, std::vector<double>>> starts;
  std::vector<double> x(6);
  for (int i = 0; i < 20000; ++i) {
    for (auto& v : x) v = u(rng);
    starts.emplace_back(hartmann6(x), x);
  }
  std::partial_sort(starts.begin(), starts.begin() + 20, starts.end());
  double best = INFINITY;
  for (int i = 0; i < 20; ++i) best = std::min(best, hartmann6(projected_descent(fv, gr, starts[i].second, 0, 1, 400, 0.05)));
  CHECK(best == doctest::Approx(-3.32237).epsilon(1e-4));
  CHECK_THROWS_AS(hartmann6(std::vector<double>{0, 0, 0, 0, 0, 1.5}), std::domain_error);
}

TEST_CASE("k-mer encoding") {
  const auto a = encode_kmer("AAAAAAAA");
  for (std::size_t i = 0; i < kPbmFeatures; ++i) CHECK(a[i] == (i % 4 == 0 ? 1.0 : 0.0));
  CHECK(kmer_index("AAAAAAAA") == 0);
  CHECK(kmer_index("TTTTTTTT") == kAllKmers - 1);
  CHECK(kmer_from_index(kmer_index("ACGTTGCA")) == "ACGTTGCA");
  CHECK_THROWS(encode_kmer("AAAAAAAX"));
  CHECK_THROWS(encode_kmer("AAAA"));
}

TEST_CASE("k-mer encoding is injective with eight ones") {
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < kAllKmers; i += 97) {
    const auto e = encode_kmer(kmer_from_index(i));
    CHECK(std::accumulate(e.begin(), e.end(), 0.0) == 8.0);
    CHECK(seen.insert(std::vector<double>(e.begin(), e.end())).second);
  }
}

TEST_CASE("PBM parsing") {
  std::istringstream good("seq\taffinity\nAAAAAAAA\t1.5\nCCCCCCCC\t-2\n");
  const auto p = parse_pbm(good);
  REQUIRE(p.sequences.size() == 2);
  CHECK(p.affinities[1] == -2.0);
  PbmObjective obj(p);
  CHECK(obj.value(p.features.row(0)) == -1.5);

  std::istringstream bad("AAAAAAAA\t1\nAAAAAAAX\t1.2\n");
  CHECK_THROWS_WITH(parse_pbm(bad), doctest::Contains("line 2"));
  std::istringstream dup("AAAAAAAA\t1\nAAAAAAAA\t2\n");
  CHECK_THROWS_WITH(parse_pbm(dup), doctest::Contains("duplicate action"));
}

TEST_CASE("PBM file with every 8-mer") {
  const auto path = std::filesystem::temp_directory_path() / "cutplane_all_kmers.tsv";
  {
    std::ofstream out(path);
    for (std::size_t i = 0; i < kAllKmers; ++i) out << kmer_from_index(i) << '\t' << (i % 101) * 0.5 << '\n';
  }
  const auto p = load_pbm(path);
  CHECK(p.features.size() == kAllKmers);
  CHECK(p.space().as_discrete().points.size() == kAllKmers);
  std::filesystem::remove(path);
}

TEST_CASE("synthetic PBM landscape") {
  Rng rng(21);
  const auto exact = gen_synthetic_pbm(rng, 0.0);
  REQUIRE(exact.problem.sequences.size() == kAllKmers);
  // zero noise: the best sequence takes the per-position argmax of the PWM
  std::string best;
  for (const auto& row : exact.pwm) best += "ACGT"[std::max_element(row.begin(), row.end()) - row.begin()];
  const auto it = std::max_element(exact.problem.affinities.begin(), exact.problem.affinities.end());
  CHECK(exact.problem.sequences[static_cast<std::size_t>(it - exact.problem.affinities.begin())] == best);

  Rng rng2(21);
  const auto noisy = gen_synthetic_pbm(rng2, 0.01);
  PbmObjective obj(noisy.problem);
  const auto values = obj.eval_batch(noisy.problem.features);
  const auto imin = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  // exhaustive scan agrees with the table's largest affinity
  const auto amax = std::max_element(noisy.problem.affinities.begin(), noisy.problem.affinities.end());
  CHECK(imin == static_cast<std::size_t>(amax - noisy.problem.affinities.begin()));
}

TEST_CASE("eval_batch examples") {
  RandomLinear f({1.0, 0.0});
  CHECK(f.eval_batch(PointSet(2, {1, 1, -1, 0})) == std::vector<double>{1.0, -1.0});
  CHECK_THROWS_AS(f.eval_batch(PointSet(2, {2, 0})), std::domain_error);
}

TEST_CASE("subprocess adapter") {
  SubprocessObjectiveSpec spec;
  spec.command = "while read line; do echo 0.0; done";
  spec.dimension = 2;
  SubprocessObjective zeros(spec);
  CHECK(zeros.eval_batch(PointSet(2, {0.5, 1, 2, 3, 4, 5})) == std::vector<double>{0, 0, 0});

  spec.command = "awk '{print $1 + $2}'";
  SubprocessObjective sum(spec);
  CHECK(sum.eval_batch(PointSet(2, {0.5, 1, 2, 3})) == std::vector<double>{1.5, 5.0});
  CHECK(sum.value(std::vector<double>{1, 1}) == 2.0);

  spec.command = "exit 3";
  spec.error_value = 7.0;
  SubprocessObjective failing(spec);
  CHECK(failing.eval_batch(PointSet(2, {0, 0, 1, 1})) == std::vector<double>{7.0, 7.0});
  CHECK(failing.failures() == 1);

  spec.command = "sleep 5";
  spec.timeout_seconds = 0.2;
  SubprocessObjective slow(spec);
  CHECK(slow.eval_batch(PointSet(2, {0, 0})) == std::vector<double>{7.0});
}

TEST_CASE("serial and OpenMP batch evaluation agree") {
  Rng rng(30);
  const auto f = gen_linear_quadratic(8, 1.0, rng);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> data(8 * 5000);
  for (auto& v : data) v = u(rng);
  PointSet pts(8, data);
  CHECK(f.eval_batch(pts, Exec::serial) == f.eval_batch(pts, Exec::omp));
}
