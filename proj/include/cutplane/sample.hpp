// The proposal distribution p^(t): exact multiplicative weights over a finite
// action set, and a Gaussian-perturbation importance sampler for boxes.
#pragma once

#include <memory>
#include <vector>

#include "cutplane/classify.hpp"
#include "cutplane/core.hpp"
#include "cutplane/parallel.hpp"

namespace cutplane {

void validate_eta(double eta);

/// Unnormalized natural-log weights; p(i) = exp(log_w[i]) / Z.
struct DiscreteWeights {
  std::vector<double> log_weights;
  double eta = 0.5;

  static DiscreteWeights uniform(std::size_t size, double eta);
  std::size_t size() const { return log_weights.size(); }
  double log_normalizer() const;
  std::vector<double> probabilities() const;
  double log_probability(std::size_t i) const { return log_weights[i] - log_normalizer(); }
};

/// log_w[i] += log(1 - eta) wherever cuts[i] == 1.
DiscreteWeights mw_update(DiscreteWeights weights, std::span<const std::uint8_t> cuts);
DiscreteWeights mw_update(DiscreteWeights weights, const SoftLabeler& h, const PointSet& points,
                          Exec exec = Exec::omp);

/// n i.i.d. indices by inverse CDF over the fixed point order.
std::vector<std::size_t> draw_discrete(const DiscreteWeights& weights, std::size_t n, Rng& rng);

/// Exact cut mass sum_i p(i) h(i).
double coverage(const DiscreteWeights& weights, std::span<const std::uint8_t> cuts);
double coverage(const DiscreteWeights& weights, const SoftLabeler& h, const PointSet& points,
                Exec exec = Exec::omp);

// ---------------------------------------------------------------------------

/// importance: weights W(x)/q(x), so the output approximates p^(t) itself.
/// target: weights W(x) only, so the output follows q(x)W(x) and stays near the recent batch.
enum class Weighting { importance, target };

struct SamplerConfig {
  Weighting weighting = Weighting::importance;
  double bandwidth_fraction = 0.3;  // of the box side, per dimension
  double shrink_coverage = 0.9;     // halve bandwidth when round coverage exceeds this
  int oversample = 10;              // candidates per requested point
  double min_ess_fraction = 0.01;

  void validate() const;
};

struct ParticleState {
  BoxSpace box;
  double eta = 0.5;
  std::vector<double> bandwidth;                           // per dimension
  PointSet pool;                                           // every point proposed so far
  std::vector<double> pool_values;
  PointSet recent;                                         // most recent batch (mixture centers)
  std::vector<std::shared_ptr<const SoftLabeler>> history; // h^(1..t)

  static ParticleState initial(const BoxSpace& box, double eta, const SamplerConfig& cfg);
  /// log W(x) = sum_s effective_h_s(x) * log(1 - eta).
  double log_target(std::span<const double> x) const;
};

struct ContinuousDraw {
  PointSet points;
  double ess = 0.0;
  std::size_t candidates = 0;
  bool low_ess = false;
  int widenings = 0;
};

PointSet draw_uniform_box(const BoxSpace& box, std::size_t n, Rng& rng);

/// Log density of the equal-weight mixture of box-truncated diagonal Gaussians.
std::vector<double> mixture_log_density(const PointSet& candidates, const PointSet& centers,
                                        std::span<const double> bandwidth, const BoxSpace& box,
                                        Exec exec = Exec::omp);

/// Target-weighted resample of n points; uniform box draws when `recent` is empty.
ContinuousDraw draw_continuous(const ParticleState& state, std::size_t n, Rng& rng,
                               const SamplerConfig& cfg = {}, Exec exec = Exec::omp);

/// Residual resampling: floor(n w_i) copies, remainder multinomial on residuals.
std::vector<std::size_t> residual_resample(std::span<const double> normalized_weights, std::size_t n,
                                           Rng& rng);

double effective_sample_size(std::span<const double> weights);

double log_sum_exp(std::span<const double> v);

}  // namespace cutplane
