#include "cutplane/sample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cutplane {

void validate_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 0.5)) throw ConfigError("eta must lie in [0, 1/2]");
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

DiscreteWeights DiscreteWeights::uniform(std::size_t size, double eta) {
  validate_eta(eta);
  return DiscreteWeights{std::vector<double>(size, 0.0), eta};
}

double DiscreteWeights::log_normalizer() const { return log_sum_exp(log_weights); }

std::vector<double> DiscreteWeights::probabilities() const {
  const double z = log_normalizer();
  if (!std::isfinite(z)) throw std::runtime_error("degenerate distribution");
  std::vector<double> p(log_weights.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_weights[i] - z);
  return p;
}

DiscreteWeights mw_update(DiscreteWeights weights, std::span<const std::uint8_t> cuts) {
  validate_eta(weights.eta);
  if (cuts.size() != weights.size()) throw std::invalid_argument("mw_update: size mismatch");
  const double step = std::log1p(-weights.eta);
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i]) weights.log_weights[i] += step;
  }
  return weights;
}

DiscreteWeights mw_update(DiscreteWeights weights, const SoftLabeler& h, const PointSet& points,
                          Exec exec) {
  const auto c = h.cuts(points, exec);
  return mw_update(std::move(weights), c);
}

std::vector<std::size_t> draw_discrete(const DiscreteWeights& weights, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("draw_discrete: n must be >= 1");
  const auto p = weights.probabilities();
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  const double total = cdf.back();
  std::uniform_real_distribution<double> unif(0.0, total);
  std::vector<std::size_t> out(n);
  for (auto& idx : out) {
    const double u = unif(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(p.size()) - 1));
    // skip zero-mass points that share a CDF plateau
    while (p[idx] == 0.0 && idx + 1 < p.size()) ++idx;
  }
  return out;
}

double coverage(const DiscreteWeights& weights, std::span<const std::uint8_t> cuts) {
  if (cuts.size() != weights.size()) throw std::invalid_argument("coverage: size mismatch");
  const auto p = weights.probabilities();
  double g = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) g += cuts[i] ? p[i] : 0.0;
  return std::clamp(g, 0.0, 1.0);
}

double coverage(const DiscreteWeights& weights, const SoftLabeler& h, const PointSet& points, Exec exec) {
  return coverage(weights, h.cuts(points, exec));
}

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (!(bandwidth_fraction > 0)) throw ConfigError("sampler: bandwidth_fraction must be > 0");
  if (oversample < 1) throw ConfigError("sampler: oversample must be >= 1");
  if (!(shrink_coverage > 0 && shrink_coverage <= 1)) throw ConfigError("sampler: shrink_coverage must lie in (0, 1]");
  if (min_ess_fraction < 0 || min_ess_fraction > 1) throw ConfigError("sampler: min_ess_fraction must lie in [0, 1]");
}

ParticleState ParticleState::initial(const BoxSpace& box, double eta, const SamplerConfig& cfg) {
  validate_eta(eta);
  cfg.validate();
  ParticleState s;
  s.box = box;
  s.eta = eta;
  s.bandwidth.resize(box.lo.size());
  for (std::size_t j = 0; j < box.lo.size(); ++j) s.bandwidth[j] = cfg.bandwidth_fraction * (box.hi[j] - box.lo[j]);
  s.pool = PointSet(box.lo.size());
  s.recent = PointSet(box.lo.size());
  return s;
}

double ParticleState::log_target(std::span<const double> x) const {
  if (history.empty() || eta == 0.0) return 0.0;
  const double step = std::log1p(-eta);
  double lw = 0.0;
  for (const auto& h : history) lw += h->effective_h(x) ? step : 0.0;
  return lw;
}

PointSet draw_uniform_box(const BoxSpace& box, std::size_t n, Rng& rng) {
  const std::size_t d = box.lo.size();
  PointSet out(d);
  out.reserve(n);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = std::uniform_real_distribution<double>(box.lo[j], box.hi[j])(rng);
    out.push_back(x);
  }
  return out;
}

namespace {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log of the box mass of N(c, h^2) along one axis
inline double log_axis_mass(double c, double h, double lo, double hi) {
  const double upper = (hi - c) / h, lower = (lo - c) / h;
  double mass = normal_cdf(upper) - normal_cdf(lower);
  if (mass <= 0) {
    // deep tails: use the complementary form for accuracy
    mass = 0.5 * std::erfc(lower / std::numbers::sqrt2) - 0.5 * std::erfc(upper / std::numbers::sqrt2);
  }
  return std::log(std::max(mass, std::numeric_limits<double>::min()));
}

}  // namespace

std::vector<double> mixture_log_density(const PointSet& candidates, const PointSet& centers,
                                        std::span<const double> bandwidth, const BoxSpace& box,
                                        Exec exec) {
  const std::size_t d = box.lo.size();
  const std::size_t k = centers.size();
  if (k == 0) throw std::invalid_argument("mixture_log_density: no centers");
  double log_kernel_const = 0.0;
  for (std::size_t j = 0; j < d; ++j) log_kernel_const -= std::log(bandwidth[j] * std::sqrt(2.0 * std::numbers::pi));
  // per-center normalization by the truncated box mass
  std::vector<double> center_offset(k);
  for (std::size_t c = 0; c < k; ++c) {
    double lm = 0.0;
    for (std::size_t j = 0; j < d; ++j) lm += log_axis_mass(centers.row(c)[j], bandwidth[j], box.lo[j], box.hi[j]);
    center_offset[c] = log_kernel_const - lm;
  }
  const double log_k = std::log(static_cast<double>(k));

  std::vector<double> out(candidates.size());
  for_each_index(exec, candidates.size(), [&](std::size_t i) {
    const auto x = candidates.row(i);
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(k);
    for (std::size_t c = 0; c < k; ++c) {
      const auto mu = centers.row(c);
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double z = (x[j] - mu[j]) / bandwidth[j];
        q += z * z;
      }
      terms[c] = center_offset[c] - 0.5 * q;
      m = std::max(m, terms[c]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    out[i] = m + std::log(s) - log_k;
  });
  return out;
}

double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  return s2 > 0 ? s * s / s2 : 0.0;
}

std::vector<std::size_t> residual_resample(std::span<const double> w, std::size_t n, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(n);
  std::vector<double> residual(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double expected = static_cast<double>(n) * w[i];
    const auto copies = static_cast<std::size_t>(std::floor(expected));
    for (std::size_t c = 0; c < copies && out.size() < n; ++c) out.push_back(i);
    residual[i] = expected - static_cast<double>(copies);
  }
  if (out.size() < n) {
    std::vector<double> cdf(residual.size());
    std::partial_sum(residual.begin(), residual.end(), cdf.begin());
    std::uniform_real_distribution<double> unif(0.0, cdf.back());
    while (out.size() < n) {
      auto it = std::upper_bound(cdf.begin(), cdf.end(), unif(rng));
      out.push_back(static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1)));
    }
  }
  return out;
}

ContinuousDraw draw_continuous(const ParticleState& state, std::size_t n, Rng& rng,
                               const SamplerConfig& cfg, Exec exec) {
  cfg.validate();
  if (n == 0) throw std::invalid_argument("draw_continuous: n must be >= 1");
  const auto& box = state.box;
  const std::size_t d = box.lo.size();
  ContinuousDraw out;
  if (state.recent.empty()) {
    out.points = draw_uniform_box(box, n, rng);
    out.ess = static_cast<double>(n);
    out.candidates = n;
    return out;
  }

  const std::size_t m = n * static_cast<std::size_t>(cfg.oversample);
  out.candidates = m;
  std::vector<double> bandwidth = state.bandwidth;
  for (int attempt = 0; attempt < 2; ++attempt) {
    // Candidates: pick a center uniformly, perturb each axis, reject outside the box.
    PointSet cand(d);
    cand.reserve(m);
    std::uniform_int_distribution<std::size_t> pick(0, state.recent.size() - 1);
    std::normal_distribution<double> normal;
    std::vector<double> x(d);
    for (std::size_t i = 0; i < m; ++i) {
      const auto mu = state.recent.row(pick(rng));
      for (std::size_t j = 0; j < d; ++j) {
        double v;
        do {
          v = mu[j] + bandwidth[j] * normal(rng);
        } while (v < box.lo[j] || v > box.hi[j]);
        x[j] = v;
      }
      cand.push_back(x);
    }

    std::vector<double> log_w(m);
    if (cfg.weighting == Weighting::importance) {
      const auto log_q = mixture_log_density(cand, state.recent, bandwidth, box, exec);
      for_each_index(exec, m, [&](std::size_t i) { log_w[i] = state.log_target(cand.row(i)) - log_q[i]; });
    } else {
      for_each_index(exec, m, [&](std::size_t i) { log_w[i] = state.log_target(cand.row(i)); });
    }

    const double lse = log_sum_exp(log_w);
    if (!std::isfinite(lse)) {
      for (auto& h : bandwidth) h *= 2.0;
      ++out.widenings;
      continue;
    }
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = std::exp(log_w[i] - lse);
    out.ess = effective_sample_size(w);
    out.low_ess = out.ess < cfg.min_ess_fraction * static_cast<double>(m);

    const auto picks = residual_resample(w, n, rng);
    out.points = PointSet(d);
    out.points.reserve(n);
    for (auto i : picks) out.points.push_back(cand.row(i));
    return out;
  }
  throw std::runtime_error("draw_continuous: target weight vanished on every candidate");
}

}  // namespace cutplane
