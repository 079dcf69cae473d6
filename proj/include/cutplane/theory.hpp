// Numerical checks of the convergence bounds and of the Gaussian-sampling
// lemmas behind bootstrap selective classification.
#pragma once

#include <vector>

#include "cutplane/classify.hpp"
#include "cutplane/core.hpp"
#include "cutplane/parallel.hpp"

namespace cutplane {

inline constexpr double kBoundSlackTolerance = 1e-9;

/// log p^(T)(x) >= gamma*eta/(eta+2) * T - eta*(eta+1) * M - log(2|X|).
double thm1_lower_bound(double gamma, double eta, int T, int M, std::size_t card_x);

/// min(T log(2/(2-eta)) - log|X|, 0): the exact-classifier cutting-plane rate.
double exact_classifier_log_bound(double eta, int T, std::size_t card_x);

struct BoundRound {
  int t = 0;
  int misclassified = 0;  // M_t(x*)
  double lhs = 0.0;       // log p^(t)(x*)
  double rhs = 0.0;
  double slack = 0.0;
};

struct BoundReport {
  std::vector<BoundRound> rounds;
  std::vector<double> coverage;  // per round, as logged
  double gamma = 0.0;            // min logged coverage
  bool gamma_zero = false;       // bound vacuous
  std::size_t x_star = 0;
  bool verdict = false;
};

/// Rebuilds exact log p^(t)(x*) from the logged cut vectors and compares it
/// against the bound with gamma = min logged coverage.
BoundReport verify_thm1(const RunTrace& trace, std::size_t x_star);

nlohmann::json to_json(const BoundReport& report);

struct CorollaryResult {
  double eta = 0.0;
  double bound = 0.0;
};

/// q = M_T(x)/(gamma T) in [0, 1/4].
CorollaryResult corollary_eta_and_bound(double q, double gamma, int T, std::size_t card_x);

/// Fraction of probe points on which the classifier abstains.
double abstention_rate(const SoftLabeler& classifier, const PointSet& probes, Exec exec = Exec::omp);

struct McResult {
  double estimate = 0.0;
  double bound = 0.0;
  std::size_t trials = 0;
  std::size_t hits = 0;

  /// sqrt(b(1-b)/trials) at the analytic bound b (capped to [0, 1]).
  double standard_error() const;
  bool within_bound(double num_se = 3.0) const { return estimate <= bound + num_se * standard_error(); }
};

double normal_cdf(double z);

/// Frequency of min_b x'theta_b - inf_{Q_tau} x'theta > sqrt(x'Sigma x) * eps for
/// theta_b ~ N(0, Sigma), a fixed unit probe x, against (1 - Phi(eps - sqrt(2 tau)))^B.
/// `sigma` is row-major d x d and positive definite.
McResult mc_gaussian_min(std::size_t d, const std::vector<double>& sigma, double tau, double eps,
                         int B, std::size_t trials, std::uint64_t seed, Exec exec = Exec::omp);

/// Frequency of max_b chi2_d >= c d against B (c e^{1-c})^{d/2}.
McResult mc_chisq_ball(std::size_t d, int B, double c, std::size_t trials, std::uint64_t seed,
                       Exec exec = Exec::omp);

/// Trials per independently seeded Monte-Carlo block.
inline constexpr std::size_t kMcBlock = 2048;

}  // namespace cutplane
