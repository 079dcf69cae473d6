#include "cutplane/theory.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "cutplane/sample.hpp"

namespace cutplane {

double thm1_lower_bound(double gamma, double eta, int T, int M, std::size_t card_x) {
  if (!(eta >= 0 && eta <= 0.5)) throw std::invalid_argument("thm1: eta must lie in [0, 1/2]");
  if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("thm1: gamma must lie in [0, 1]");
  if (T < 0 || M < 0 || M > T) throw std::invalid_argument("thm1: need 0 <= M <= T");
  if (card_x == 0) throw std::invalid_argument("thm1: |X| must be >= 1");
  return gamma * eta / (eta + 2.0) * T - eta * (eta + 1.0) * M -
         std::log(2.0 * static_cast<double>(card_x));
}

double exact_classifier_log_bound(double eta, int T, std::size_t card_x) {
  if (!(eta >= 0 && eta <= 0.5)) throw std::invalid_argument("eta must lie in [0, 1/2]");
  return std::min(T * std::log(2.0 / (2.0 - eta)) - std::log(static_cast<double>(card_x)), 0.0);
}

BoundReport verify_thm1(const RunTrace& trace, std::size_t x_star) {
  const std::size_t card = trace.space_size;
  if (card == 0) throw std::invalid_argument("verify_thm1: trace is not from a discrete run");
  if (x_star >= card) throw std::invalid_argument("verify_thm1: x_star outside the action space");

  BoundReport report;
  report.x_star = x_star;
  std::vector<const RoundRecord*> rounds;
  for (const auto& r : trace.rounds) {
    if (r.t == 0) continue;
    if (r.cuts.size() != card || !r.coverage) {
      throw std::invalid_argument("verify_thm1: round " + std::to_string(r.t) +
                                  " lacks logged cut vector or coverage");
    }
    rounds.push_back(&r);
    report.coverage.push_back(*r.coverage);
  }
  if (rounds.empty()) throw std::invalid_argument("verify_thm1: no classifier rounds");
  report.gamma = *std::min_element(report.coverage.begin(), report.coverage.end());
  report.gamma_zero = report.gamma <= 0.0;

  // M_t(x) counts, closed-form weights (1 - eta)^{M_t(x)} with uniform start.
  std::vector<int> counts(card, 0);
  const double step = std::log1p(-trace.eta);
  std::vector<double> log_w(card);
  report.verdict = true;
  for (const auto* r : rounds) {
    for (std::size_t i = 0; i < card; ++i) counts[i] += r->cuts[i];
    for (std::size_t i = 0; i < card; ++i) log_w[i] = trace.eta == 0.0 ? 0.0 : counts[i] * step;
    BoundRound b;
    b.t = r->t;
    b.misclassified = counts[x_star];
    b.lhs = log_w[x_star] - log_sum_exp(log_w);
    b.rhs = thm1_lower_bound(report.gamma, trace.eta, r->t, b.misclassified, card);
    b.slack = b.lhs - b.rhs;
    if (b.slack < -kBoundSlackTolerance) report.verdict = false;
    report.rounds.push_back(b);
  }
  return report;
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : report.rounds) {
    rounds.push_back({{"t", r.t}, {"M", r.misclassified}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack}});
  }
  return {{"x_star", report.x_star},
          {"gamma", report.gamma},
          {"gamma_zero", report.gamma_zero},
          {"coverage", report.coverage},
          {"rounds", rounds},
          {"verdict", report.verdict}};
}

CorollaryResult corollary_eta_and_bound(double q, double gamma, int T, std::size_t card_x) {
  if (!(q >= 0 && q <= 0.25)) throw std::invalid_argument("corollary: q must lie in [0, 1/4]");
  if (card_x == 0) throw std::invalid_argument("corollary: |X| must be >= 1");
  CorollaryResult out;
  out.eta = q == 0.0 ? 0.5 : std::min(0.5, std::sqrt(0.25 + 1.0 / (2.0 * q)) - 1.5);
  out.bound = std::min(0.2, 1.0 / 3.0 - 4.0 * q / 3.0) * gamma * T / 2.0 -
              std::log(2.0 * static_cast<double>(card_x));
  return out;
}

double abstention_rate(const SoftLabeler& classifier, const PointSet& probes, Exec exec) {
  if (probes.empty()) throw std::invalid_argument("abstention_rate: no probe points");
  const auto d = classifier.decide_batch(probes, exec);
  const auto abstained = std::count(d.begin(), d.end(), Decision::abstain);
  return static_cast<double>(abstained) / static_cast<double>(probes.size());
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double McResult::standard_error() const {
  const double b = std::clamp(bound, 0.0, 1.0);
  return std::sqrt(b * (1.0 - b) / static_cast<double>(std::max<std::size_t>(trials, 1)));
}

namespace {

// Runs `trials` Bernoulli trials in fixed blocks, each with its own stream.
template <class Trial>
std::size_t count_hits(std::size_t trials, std::uint64_t seed, Exec exec, Trial&& trial) {
  const std::size_t blocks = (trials + kMcBlock - 1) / kMcBlock;
  std::vector<std::size_t> hits(blocks, 0);
  for_each_index(exec, blocks, [&](std::size_t blk) {
    Rng rng(splitmix64(seed ^ splitmix64(blk + 1)));
    const std::size_t end = std::min(trials, (blk + 1) * kMcBlock);
    std::size_t h = 0;
    for (std::size_t i = blk * kMcBlock; i < end; ++i) h += trial(rng) ? 1 : 0;
    hits[blk] = h;
  });
  std::size_t total = 0;
  for (auto h : hits) total += h;
  return total;
}

}  // namespace

McResult mc_gaussian_min(std::size_t d, const std::vector<double>& sigma, double tau, double eps,
                         int B, std::size_t trials, std::uint64_t seed, Exec exec) {
  if (d == 0 || sigma.size() != d * d) throw std::invalid_argument("mc_gaussian_min: Sigma must be d x d");
  if (B < 1) throw std::invalid_argument("mc_gaussian_min: need B >= 1");
  if (tau < 0) throw std::invalid_argument("mc_gaussian_min: tau must be >= 0");
  if (trials < 1000) throw std::invalid_argument("mc_gaussian_min: need at least 1000 trials");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> s(
      sigma.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::MatrixXd cov = s;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("mc_gaussian_min: Sigma not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  // Fixed unit probe; theta_hat = 0 without loss of generality.
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d)) / std::sqrt(static_cast<double>(d));
  const double scale = std::sqrt(x.dot(cov * x));
  const double ellipse_inf = -std::sqrt(2.0 * tau) * scale;
  const Eigen::VectorXd probe = chol.transpose() * x;  // x'theta = probe'z for theta = L z

  McResult out;
  out.trials = trials;
  out.bound = std::pow(1.0 - normal_cdf(eps - std::sqrt(2.0 * tau)), B);
  out.hits = count_hits(trials, seed, exec, [&](Rng& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    double min_score = std::numeric_limits<double>::infinity();
    for (int b = 0; b < B; ++b) {
      for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
      min_score = std::min(min_score, probe.dot(z));
    }
    return min_score - ellipse_inf > scale * eps;
  });
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(trials);
  return out;
}

McResult mc_chisq_ball(std::size_t d, int B, double c, std::size_t trials, std::uint64_t seed, Exec exec) {
  if (!(c > 1)) throw std::invalid_argument("mc_chisq_ball: c must be > 1");
  if (d == 0 || B < 1 || trials == 0) throw std::invalid_argument("mc_chisq_ball: need d, B, trials >= 1");
  McResult out;
  out.trials = trials;
  out.bound = B * std::pow(c * std::exp(1.0 - c), static_cast<double>(d) / 2.0);
  const double level = c * static_cast<double>(d);
  out.hits = count_hits(trials, seed, exec, [&](Rng& rng) {
    std::normal_distribution<double> normal;
    for (int b = 0; b < B; ++b) {
      double chi2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double g = normal(rng);
        chi2 += g * g;
      }
      if (chi2 >= level) return true;
    }
    return false;
  });
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(trials);
  return out;
}

}  // namespace cutplane
