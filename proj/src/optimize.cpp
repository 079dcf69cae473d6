#include "cutplane/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cutplane {

void PairwiseConfig::validate() const {
  if (c < 1) throw ConfigError("pairwise: c must be >= 1");
}

void OptimizerConfig::validate() const {
  if (T < 1) throw ConfigError("optimizer: T must be >= 1");
  if (n < 2) throw ConfigError("optimizer: n must be >= 2");
  validate_eta(eta);
  sampler.validate();
  classifier.tree.validate();
  classifier.bootstrap.validate();
  if (pairwise) pairwise->validate();
}

std::unique_ptr<SoftLabeler> make_labeler(const ClassifierSpec& spec, const Objective& objective, Exec exec) {
  switch (spec.kind) {
    case ClassifierKind::tree_ensemble: return std::make_unique<TreeEnsemble>(spec.tree, exec);
    case ClassifierKind::bootstrap_linear: return std::make_unique<BootstrapLinear>(spec.bootstrap, exec);
    case ClassifierKind::css_linear: return std::make_unique<CssLinear>();
    case ClassifierKind::oracle:
      return std::make_unique<OracleSublevel>(
          [&objective](std::span<const double> x) { return objective.value(x); });
  }
  throw ConfigError("unknown classifier kind");
}

std::vector<std::uint8_t> pairwise_labels(std::span<const std::size_t> items,
                                          std::span<const std::size_t> pool, const Comparator& g,
                                          int c, Rng& rng) {
  if (pool.size() < 2) throw std::invalid_argument("pairwise_labels: comparator pool needs >= 2 points");
  if (c < 1) throw ConfigError("pairwise: c must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::uint8_t> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    int beaten_by = 0;
    for (int k = 0; k < c; ++k) beaten_by += g(pool[pick(rng)], items[i]);
    // mean of c indicators > 0.5
    out[i] = 2 * beaten_by > c ? 1 : 0;
  }
  return out;
}

std::vector<std::uint8_t> pairwise_labels_all_pairs(std::span<const std::size_t> items,
                                                    std::span<const std::size_t> pool,
                                                    const Comparator& g) {
  std::vector<std::uint8_t> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::size_t beaten_by = 0;
    for (auto p : pool) beaten_by += g(p, items[i]);
    out[i] = 2 * beaten_by > pool.size() ? 1 : 0;
  }
  return out;
}

std::size_t discrete_argmin(const Objective& objective, const ActionSpace& space, Exec exec) {
  const auto values = objective.eval_batch(space.as_discrete().points, exec);
  return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

namespace {

PointSet rows_of(const PointSet& points, std::span<const std::size_t> idx) {
  PointSet out(points.dim());
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(points.row(i));
  return out;
}

std::vector<double> evaluate_round(const Objective& objective, const PointSet& points, int t, Exec exec) {
  try {
    auto values = objective.eval_batch(points, exec);
    for (double y : values) {
      if (!std::isfinite(y)) throw std::domain_error("objective returned a non-finite value");
    }
    return values;
  } catch (const std::exception& e) {
    throw std::runtime_error("round " + std::to_string(t) + ": objective evaluation failed: " + e.what());
  }
}

void record_round(RunTrace& trace, RoundRecord r, std::vector<Observation>& history) {
  double best = trace.rounds.empty() ? std::numeric_limits<double>::infinity() : trace.rounds.back().best_so_far;
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    best = std::min(best, r.values[i]);
    auto row = r.points.row(i);
    history.push_back(make_observation(std::vector<double>(row.begin(), row.end()), r.values[i],
                                       r.indices.empty() ? kNoIndex : r.indices[i]));
  }
  r.best_so_far = best;
  trace.rounds.push_back(std::move(r));
}

void finish(RunTrace& trace) {
  if (trace.rounds.empty()) return;
  const auto& last = trace.rounds.back();
  const auto it = std::min_element(last.values.begin(), last.values.end());
  const auto i = static_cast<std::size_t>(it - last.values.begin());
  auto row = last.points.row(i);
  trace.final_x.assign(row.begin(), row.end());
  trace.final_y = *it;
}

void check_space(const Objective& objective, const ActionSpace& space) {
  if (space.dimension() != objective.dimension()) {
    throw ConfigError("action space dimension does not match the objective");
  }
}

}  // namespace

RunTrace run_classify_opt(const Objective& objective, const ActionSpace& space,
                          const OptimizerConfig& cfg, const SeedPolicy& seed, const std::string& method) {
  cfg.validate();
  check_space(objective, space);
  Rng rng = seed.make_rng();
  const auto n = static_cast<std::size_t>(cfg.n);

  RunTrace trace;
  trace.method = method;
  trace.seed = seed;
  trace.eta = cfg.eta;
  std::vector<Observation> history;
  std::vector<std::size_t> latest;  // history positions of the most recent batch

  const bool discrete = space.is_discrete();
  DiscreteWeights weights;
  ParticleState particles;
  if (discrete) {
    trace.space_size = space.as_discrete().points.size();
    weights = DiscreteWeights::uniform(trace.space_size, cfg.eta);
    if (cfg.log_cuts && objective.is_pure()) trace.x_star = discrete_argmin(objective, space, cfg.exec);
  } else {
    particles = ParticleState::initial(space.as_box(), cfg.eta, cfg.sampler);
  }

  auto propose = [&](RoundRecord& r) {
    if (discrete) {
      r.indices = draw_discrete(weights, n, rng);
      r.points = rows_of(space.as_discrete().points, r.indices);
    } else {
      auto draw = draw_continuous(particles, n, rng, cfg.sampler, cfg.exec);
      r.points = std::move(draw.points);
      if (!particles.recent.empty()) {
        r.ess = draw.ess;
        if (draw.low_ess) {
          r.warnings.push_back("low effective sample size " + std::to_string(draw.ess) + " of " +
                               std::to_string(draw.candidates) + " candidates");
        }
        if (draw.widenings > 0) r.warnings.push_back("bandwidth widened after vanishing target weights");
      }
    }
  };

  auto observe = [&](RoundRecord r) {
    r.values = evaluate_round(objective, r.points, r.t, cfg.exec);
    const std::size_t start = history.size();
    record_round(trace, std::move(r), history);
    latest.resize(n);
    std::iota(latest.begin(), latest.end(), start);
    if (!discrete) {
      const auto& last = trace.rounds.back();
      particles.pool.append(last.points);
      particles.pool_values.insert(particles.pool_values.end(), last.values.begin(), last.values.end());
      particles.recent = last.points;
    }
  };

  {
    RoundRecord r0;
    r0.t = 0;
    propose(r0);
    observe(std::move(r0));
  }

  double bandwidth_scale = 1.0;
  for (int t = 1; t <= cfg.T; ++t) {
    RoundRecord r;
    r.t = t;

    std::vector<double> threshold_values;
    if (cfg.threshold == ThresholdPolicy::latest_batch) {
      for (auto i : latest) threshold_values.push_back(history[i].y);
    } else {
      for (const auto& o : history) threshold_values.push_back(o.y);
    }
    const double alpha = median_threshold(threshold_values);
    r.alpha = alpha;

    LabeledSet data;
    if (cfg.pairwise) {
      // Labels come only from comparisons against the latest batch.
      data = relabel_history(history, alpha);
      std::vector<std::size_t> items(history.size());
      std::iota(items.begin(), items.end(), 0);
      const Comparator g = [&history](std::size_t a, std::size_t b) -> std::uint8_t {
        return history[a].y < history[b].y ? 1 : 0;
      };
      Rng pair_rng = child_rng(rng);
      data.labels = pairwise_labels(items, latest, g, cfg.pairwise->c, pair_rng);
    } else {
      data = relabel_history(history, alpha);
    }

    std::shared_ptr<SoftLabeler> h = make_labeler(cfg.classifier, objective, cfg.exec);
    try {
      Rng fit_rng = child_rng(rng);
      h->fit(data, fit_rng);
    } catch (const std::exception& e) {
      trace.error = "round " + std::to_string(t) + ": classifier fit failed: " + e.what();
      finish(trace);
      return trace;
    }

    if (discrete) {
      const auto cuts = h->cuts(space.as_discrete().points, cfg.exec);
      r.coverage = coverage(weights, cuts);
      weights = mw_update(std::move(weights), cuts);
      if (cfg.log_cuts) r.cuts = cuts;
    } else {
      const auto& recent = particles.recent;
      const auto cuts = h->cuts(recent, cfg.exec);
      const double g = static_cast<double>(std::accumulate(cuts.begin(), cuts.end(), 0)) /
                       static_cast<double>(cuts.size());
      r.coverage = g;
      particles.history.push_back(h);
      if (g > cfg.sampler.shrink_coverage) {
        for (auto& b : particles.bandwidth) b *= 0.5;
        bandwidth_scale *= 0.5;
      }
      r.bandwidth_scale = bandwidth_scale;
    }

    propose(r);
    observe(std::move(r));
  }
  finish(trace);
  return trace;
}

RunTrace run_random(const Objective& objective, const ActionSpace& space, int n, int T,
                    const SeedPolicy& seed, const std::string& method) {
  if (T < 1) throw ConfigError("random: T must be >= 1");
  if (n < 1) throw ConfigError("random: n must be >= 1");
  check_space(objective, space);
  Rng rng = seed.make_rng();
  RunTrace trace;
  trace.method = method;
  trace.seed = seed;
  std::vector<Observation> history;
  if (space.is_discrete()) trace.space_size = space.as_discrete().points.size();
  for (int t = 1; t <= T; ++t) {
    RoundRecord r;
    r.t = t;
    if (space.is_discrete()) {
      const auto& pts = space.as_discrete().points;
      std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
      r.indices.resize(static_cast<std::size_t>(n));
      for (auto& i : r.indices) i = pick(rng);
      r.points = rows_of(pts, r.indices);
    } else {
      r.points = draw_uniform_box(space.as_box(), static_cast<std::size_t>(n), rng);
    }
    r.values = evaluate_round(objective, r.points, t, Exec::omp);
    record_round(trace, std::move(r), history);
  }
  finish(trace);
  return trace;
}

RunTrace run_random2x(const Objective& objective, const ActionSpace& space, int n, int T, const SeedPolicy& seed) {
  return run_random(objective, space, 2 * n, T, seed, "random-2x");
}

}  // namespace cutplane
