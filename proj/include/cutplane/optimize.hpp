// The classification-based cutting-plane optimizer, its pairwise-comparison
// variant, and the random / random-2x baselines.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "cutplane/classify.hpp"
#include "cutplane/core.hpp"
#include "cutplane/objectives.hpp"
#include "cutplane/sample.hpp"

namespace cutplane {

enum class ClassifierKind { tree_ensemble, bootstrap_linear, css_linear, oracle };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::tree_ensemble;
  TreeEnsembleConfig tree;
  BootstrapLinearConfig bootstrap;
};

struct PairwiseConfig {
  int c = 10;  // comparisons per labeled point

  void validate() const;
};

struct OptimizerConfig {
  int T = 10;
  int n = 100;
  double eta = 0.5;
  ClassifierSpec classifier;
  ThresholdPolicy threshold = ThresholdPolicy::latest_batch;
  SamplerConfig sampler;
  std::optional<PairwiseConfig> pairwise;
  bool log_cuts = false;  // store per-point h vectors (discrete spaces)
  Exec exec = Exec::omp;

  void validate() const;
};

/// Builds a fresh unfitted labeler for one round.
std::unique_ptr<SoftLabeler> make_labeler(const ClassifierSpec& spec, const Objective& objective,
                                          Exec exec = Exec::omp);

/// Pairwise oracle g(a, b) = 1{f(a) < f(b)}, addressed by position in the value list.
using Comparator = std::function<std::uint8_t(std::size_t a, std::size_t b)>;

/// For each item, draw c comparators uniformly from `pool` and label it 1
/// (cut) iff the mean of g(comparator, item) exceeds 0.5.
std::vector<std::uint8_t> pairwise_labels(std::span<const std::size_t> items,
                                          std::span<const std::size_t> pool, const Comparator& g,
                                          int c, Rng& rng);

/// Deterministic variant comparing every item against the whole pool.
std::vector<std::uint8_t> pairwise_labels_all_pairs(std::span<const std::size_t> items,
                                                    std::span<const std::size_t> pool,
                                                    const Comparator& g);

/// Runs T classifier rounds after a uniform round 0 (n * (T + 1) evaluations).
RunTrace run_classify_opt(const Objective& objective, const ActionSpace& space,
                          const OptimizerConfig& cfg, const SeedPolicy& seed,
                          const std::string& method = "classify");

/// T rounds of n uniform draws.
RunTrace run_random(const Objective& objective, const ActionSpace& space, int n, int T,
                    const SeedPolicy& seed, const std::string& method = "random");
RunTrace run_random2x(const Objective& objective, const ActionSpace& space, int n, int T,
                      const SeedPolicy& seed);

/// Index of the minimal objective value over a discrete space (ties: lowest index).
std::size_t discrete_argmin(const Objective& objective, const ActionSpace& space, Exec exec = Exec::omp);

}  // namespace cutplane
