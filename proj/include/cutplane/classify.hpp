// Sublevel-set classifiers used as cuts: consensus tree ensembles,
// multiplier-bootstrap logistic ensembles, exact consistent selective
// strategy (CSS) for linear hypotheses, and a perfect oracle.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cutplane/core.hpp"
#include "cutplane/objectives.hpp"
#include "cutplane/parallel.hpp"

namespace cutplane {

enum class Decision : std::uint8_t { keep = 0, cut = 1, abstain = 2 };

/// h(x) as used by the multiplicative-weights update: abstentions never cut.
inline std::uint8_t effective_h(Decision d) { return d == Decision::cut ? 1 : 0; }

class SoftLabeler {
 public:
  virtual ~SoftLabeler() = default;
  virtual void fit(const LabeledSet& data, Rng& rng) = 0;
  virtual Decision decide(std::span<const double> x) const = 0;

  std::uint8_t effective_h(std::span<const double> x) const { return cutplane::effective_h(decide(x)); }
  std::vector<Decision> decide_batch(const PointSet& points, Exec exec = Exec::omp) const;
  std::vector<std::uint8_t> cuts(const PointSet& points, Exec exec = Exec::omp) const;
};

// ---------------------------------------------------------------------------
// Trees

struct TreeEnsembleConfig {
  int n_trees = 100;
  int max_depth = 0;              // 0 = unlimited
  int min_leaf = 1;
  double feature_fraction = 0.0;  // 0 = sqrt(d)/d
  bool bootstrap_rows = true;
  double consensus_tau = 0.75;

  void validate() const;
};

/// Binary CART tree: Gini impurity, axis-aligned splits at midpoints.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::uint8_t label = 0;
  };

  /// `rows` lists training rows with multiplicity (bootstrap samples repeat rows).
  void fit(const PointSet& x, std::span<const std::uint8_t> z, std::vector<std::size_t> rows,
           std::size_t features_per_split, int max_depth, int min_leaf, Rng& rng);
  std::uint8_t predict(std::span<const double> x) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

 private:
  int build(const PointSet& x, std::span<const std::uint8_t> z, std::vector<std::size_t>& rows,
            std::size_t begin, std::size_t end, int depth, std::size_t features_per_split,
            int max_depth, int min_leaf, Rng& rng);
  std::vector<Node> nodes_;
};

class TreeEnsemble : public SoftLabeler {
 public:
  explicit TreeEnsemble(TreeEnsembleConfig cfg = {}, Exec exec = Exec::omp);
  void fit(const LabeledSet& data, Rng& rng) override;
  Decision decide(std::span<const double> x) const override;

  int votes_for_cut(std::span<const double> x) const;
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const TreeEnsembleConfig& config() const { return cfg_; }

 private:
  TreeEnsembleConfig cfg_;
  Exec exec_;
  std::vector<DecisionTree> trees_;
};

TreeEnsemble fit_tree_ensemble(const LabeledSet& data, const TreeEnsembleConfig& cfg, Rng& rng,
                               Exec exec = Exec::omp);

/// Supermajority rule: cut if >= tau of the voters say 1, keep if >= tau say 0.
Decision consensus_from_votes(int votes_for_cut, int voters, double tau);
Decision consensus_decide(const TreeEnsemble& ensemble, std::span<const double> x, double tau);

// ---------------------------------------------------------------------------
// Linear hypotheses. Parameter vectors carry the bias as their last entry.

using Theta = std::vector<double>;

/// Appends the constant-1 bias feature.
PointSet augment_bias(const PointSet& x);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double grad_norm)
      : std::runtime_error(what), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

struct LogisticOptions {
  double ridge = 1e-3;
  double tol = 1e-8;
  int max_iter = 100;
};

/// Weighted ridge logistic loss
///   (1/n) sum_i w_i [log(1 + e^{s_i}) - z_i s_i] + (ridge/2)|theta|^2,  s_i = theta'x_i,
/// with w_i = 1 + u_i (u empty means u = 0). `x_aug` already has the bias column.
double logistic_objective(const PointSet& x_aug, std::span<const std::uint8_t> z,
                          std::span<const double> u, double ridge, std::span<const double> theta);
std::vector<double> logistic_gradient(const PointSet& x_aug, std::span<const std::uint8_t> z,
                                      std::span<const double> u, double ridge,
                                      std::span<const double> theta);

struct LogisticFit {
  Theta theta;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton on the weighted objective; throws ConvergenceError past max_iter.
LogisticFit fit_weighted_logistic(const PointSet& x_aug, std::span<const std::uint8_t> z,
                                  std::span<const double> u, const LogisticOptions& opts,
                                  std::optional<Theta> warm_start = std::nullopt);

/// Unweighted fit on raw features (the bias column is appended internally).
LogisticFit fit_logistic_mle(const LabeledSet& data, double ridge, double tol, int max_iter = 100);

struct BootstrapLinearConfig {
  int B = 52;            // ceil(15 log(3/delta)) at delta = 0.1
  double sigma = 0.0;    // 0 = sqrt(d) + 1
  double ridge = 1e-3;
  double tol = 1e-8;
  int max_iter = 100;

  void validate() const;
  double sigma_for(std::size_t d) const;
};

/// Smallest resample count satisfying B >= 15 log(3/delta).
int bootstrap_count_for(double delta);

/// theta_circ = sigma * (argmin L_n(theta, u) - theta_hat) + theta_hat.
Theta bootstrap_resample(const PointSet& x_aug, std::span<const std::uint8_t> z,
                         std::span<const double> u, const Theta& theta_hat, double sigma,
                         const LogisticOptions& opts);

struct BootstrapFit {
  Theta theta_hat;
  std::vector<Theta> thetas;
};

/// B inflated bootstrap parameter vectors; resample b uses child stream b of `rng`.
BootstrapFit multiplier_bootstrap(const LabeledSet& data, const BootstrapLinearConfig& cfg, Rng& rng,
                                  Exec exec = Exec::omp);

/// Cut iff every x'theta > 0, keep iff every x'theta <= 0. `x` excludes the bias.
Decision consensus_linear(const std::vector<Theta>& thetas, std::span<const double> x);

class BootstrapLinear : public SoftLabeler {
 public:
  explicit BootstrapLinear(BootstrapLinearConfig cfg = {}, Exec exec = Exec::omp);
  void fit(const LabeledSet& data, Rng& rng) override;
  Decision decide(std::span<const double> x) const override;
  const std::vector<Theta>& thetas() const { return thetas_; }

 private:
  BootstrapLinearConfig cfg_;
  Exec exec_;
  std::vector<Theta> thetas_;
  std::optional<Decision> constant_;  // single-class training data
};

// ---------------------------------------------------------------------------
// Exact CSS for linear (bias-augmented) hypotheses

enum class VersionSpaceDecision { pos, neg, disagree };

inline constexpr double kCssMarginTolerance = 1e-9;

/// Largest margin m such that some theta with |theta|_inf <= 1 satisfies
/// sign_i * theta'x_i / |x_i| >= m for every (bias-augmented) row.
double max_separation_margin(const PointSet& x_aug, std::span<const double> signs);

/// Throws std::runtime_error("non-realizable sample") when the data cannot be separated.
VersionSpaceDecision css_linear_decide(const LabeledSet& data, std::span<const double> x);

class CssLinear : public SoftLabeler {
 public:
  void fit(const LabeledSet& data, Rng& rng) override;
  Decision decide(std::span<const double> x) const override;
  VersionSpaceDecision version_space_decide(std::span<const double> x) const;

 private:
  PointSet x_aug_;
  std::vector<double> signs_;
};

// ---------------------------------------------------------------------------

/// Cuts exactly the strict superlevel set {f > alpha}. fit() only reads data.alpha.
class OracleSublevel : public SoftLabeler {
 public:
  using Function = std::function<double(std::span<const double>)>;
  explicit OracleSublevel(Function f, double alpha = 0.0) : f_(std::move(f)), alpha_(alpha) {}
  void fit(const LabeledSet& data, Rng& rng) override;
  Decision decide(std::span<const double> x) const override;
  double alpha() const { return alpha_; }

 private:
  Function f_;
  double alpha_;
};

OracleSublevel oracle_sublevel(OracleSublevel::Function f, double alpha);

}  // namespace cutplane
