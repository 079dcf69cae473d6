#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cutplane/classify.hpp"

namespace cutplane {

PointSet augment_bias(const PointSet& x) {
  PointSet out(x.dim() + 1);
  out.reserve(x.size());
  std::vector<double> row(x.dim() + 1, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::copy(x.row(i).begin(), x.row(i).end(), row.begin());
    out.push_back(row);
  }
  return out;
}

namespace {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// log(1 + e^s) without overflow.
inline double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

inline double weight(std::span<const double> u, std::size_t i) { return u.empty() ? 1.0 : 1.0 + u[i]; }

void check_shapes(const PointSet& x, std::span<const std::uint8_t> z, std::span<const double> u,
                  std::span<const double> theta) {
  if (x.size() != z.size() || (!u.empty() && u.size() != z.size()) || theta.size() != x.dim()) {
    throw std::invalid_argument("logistic: inconsistent shapes");
  }
  if (x.empty()) throw std::invalid_argument("logistic: empty data");
}

}  // namespace

double logistic_objective(const PointSet& x, std::span<const std::uint8_t> z,
                          std::span<const double> u, double ridge, std::span<const double> theta) {
  check_shapes(x, z, u, theta);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = dot(x.row(i), theta);
    loss += weight(u, i) * (softplus(s) - z[i] * s);
  }
  return loss / static_cast<double>(x.size()) + 0.5 * ridge * dot(theta, theta);
}

std::vector<double> logistic_gradient(const PointSet& x, std::span<const std::uint8_t> z,
                                      std::span<const double> u, double ridge,
                                      std::span<const double> theta) {
  check_shapes(x, z, u, theta);
  std::vector<double> g(theta.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto row = x.row(i);
    const double r = weight(u, i) * (sigmoid(dot(row, theta)) - z[i]) * inv_n;
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += r * row[j];
  }
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += ridge * theta[j];
  return g;
}

LogisticFit fit_weighted_logistic(const PointSet& x, std::span<const std::uint8_t> z,
                                  std::span<const double> u, const LogisticOptions& opts,
                                  std::optional<Theta> warm_start) {
  const std::size_t p = x.dim();
  const std::size_t n = x.size();
  Theta theta = warm_start ? *warm_start : Theta(p, 0.0);
  check_shapes(x, z, u, theta);
  if (opts.ridge < 0) throw ConfigError("logistic: ridge must be >= 0");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(
      x.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const double inv_n = 1.0 / static_cast<double>(n);

  double f = logistic_objective(x, z, u, opts.ridge, theta);
  double gnorm = 0.0;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    Eigen::Map<Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(p));
    Eigen::VectorXd s = xm * th;
    Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
    Eigen::VectorXd curv(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double w = weight(u, i) * inv_n;
      const double q = sigmoid(s[ii]);
      resid[ii] = w * (q - z[i]);
      curv[ii] = w * q * (1.0 - q);
    }
    Eigen::VectorXd grad = xm.transpose() * resid + opts.ridge * th;
    gnorm = grad.norm();
    if (gnorm <= opts.tol) return LogisticFit{theta, gnorm, iter};
    if (iter == opts.max_iter) break;

    Eigen::MatrixXd hess = xm.transpose() * curv.asDiagonal() * xm;
    hess.diagonal().array() += opts.ridge + 1e-12;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) step = grad;

    // Backtracking line search on the exact objective.
    const double slope = grad.dot(step);
    double t = 1.0;
    Theta trial(p);
    double f_trial = f;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < p; ++j) trial[j] = theta[j] - t * step[static_cast<Eigen::Index>(j)];
      f_trial = logistic_objective(x, z, u, opts.ridge, trial);
      if (f_trial <= f - 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (f_trial > f) {
      // No descent possible at double precision: we are at the numerical optimum.
      if (gnorm <= std::max(opts.tol, 1e-6)) return LogisticFit{theta, gnorm, iter};
      break;
    }
    theta = trial;
    f = f_trial;
  }
  throw ConvergenceError("logistic fit did not converge; gradient norm " + std::to_string(gnorm), gnorm);
}

LogisticFit fit_logistic_mle(const LabeledSet& data, double ridge, double tol, int max_iter) {
  if (data.size() == 0) throw std::invalid_argument("logistic: empty data");
  return fit_weighted_logistic(augment_bias(data.features), data.labels, {},
                               LogisticOptions{ridge, tol, max_iter});
}

void BootstrapLinearConfig::validate() const {
  if (B < 1) throw ConfigError("bootstrap: B must be >= 1");
  if (sigma != 0.0 && sigma < 1.0) throw ConfigError("bootstrap: sigma must be >= 1");
  if (ridge < 0) throw ConfigError("bootstrap: ridge must be >= 0");
  if (!(tol > 0)) throw ConfigError("bootstrap: tol must be > 0");
  if (max_iter < 1) throw ConfigError("bootstrap: max_iter must be >= 1");
}

double BootstrapLinearConfig::sigma_for(std::size_t d) const {
  return sigma > 0 ? sigma : std::sqrt(static_cast<double>(d)) + 1.0;
}

int bootstrap_count_for(double delta) {
  if (!(delta > 0 && delta < 1)) throw ConfigError("bootstrap: delta must lie in (0, 1)");
  return static_cast<int>(std::ceil(15.0 * std::log(3.0 / delta) - 1e-12));
}

Theta bootstrap_resample(const PointSet& x_aug, std::span<const std::uint8_t> z,
                         std::span<const double> u, const Theta& theta_hat, double sigma,
                         const LogisticOptions& opts) {
  auto fit = fit_weighted_logistic(x_aug, z, u, opts, theta_hat);
  Theta out(theta_hat.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = sigma * (fit.theta[j] - theta_hat[j]) + theta_hat[j];
  return out;
}

BootstrapFit multiplier_bootstrap(const LabeledSet& data, const BootstrapLinearConfig& cfg, Rng& rng,
                                  Exec exec) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("bootstrap: empty data");
  const auto x_aug = augment_bias(data.features);
  const LogisticOptions opts{cfg.ridge, cfg.tol, cfg.max_iter};
  BootstrapFit out;
  out.theta_hat = fit_weighted_logistic(x_aug, data.labels, {}, opts).theta;
  const double sigma = cfg.sigma_for(data.features.dim());
  const std::size_t n = data.size();

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.B));
  for (auto& s : seeds) s = rng();
  out.thetas.assign(seeds.size(), Theta{});
  std::vector<std::string> errors(seeds.size());

  for_each_index(exec, seeds.size(), [&](std::size_t b) {
    Rng stream(splitmix64(seeds[b]));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> u(n);
    constexpr int kMaxRetries = 10;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
      double mass0 = 0.0, mass1 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = unif(stream);
        (data.labels[i] ? mass1 : mass0) += 1.0 + u[i];
      }
      if (mass0 <= 1e-12 || mass1 <= 1e-12) continue;
      try {
        out.thetas[b] = bootstrap_resample(x_aug, data.labels, u, out.theta_hat, sigma, opts);
        return;
      } catch (const ConvergenceError& e) {
        errors[b] = e.what();
      }
    }
    if (errors[b].empty()) errors[b] = "degenerate weighted problem (one class carries all weight)";
  });
  for (std::size_t b = 0; b < seeds.size(); ++b) {
    if (out.thetas[b].empty()) {
      throw std::runtime_error("bootstrap resample " + std::to_string(b) + " failed: " + errors[b]);
    }
  }
  return out;
}

Decision consensus_linear(const std::vector<Theta>& thetas, std::span<const double> x) {
  if (thetas.empty()) throw std::invalid_argument("consensus_linear: no parameter vectors");
  bool any_pos = false, any_nonpos = false;
  for (const auto& th : thetas) {
    if (th.size() != x.size() + 1) throw std::invalid_argument("consensus_linear: dimension mismatch");
    const double s = dot(x, std::span<const double>(th.data(), x.size())) + th.back();
    (s > 0 ? any_pos : any_nonpos) = true;
  }
  if (any_pos && !any_nonpos) return Decision::cut;
  if (any_nonpos && !any_pos) return Decision::keep;
  return Decision::abstain;
}

BootstrapLinear::BootstrapLinear(BootstrapLinearConfig cfg, Exec exec) : cfg_(cfg), exec_(exec) {
  cfg_.validate();
}

void BootstrapLinear::fit(const LabeledSet& data, Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("bootstrap linear: empty training set");
  thetas_.clear();
  constant_.reset();
  if (!data.has_both_classes()) {
    constant_ = data.labels.front() ? Decision::cut : Decision::keep;
    return;
  }
  thetas_ = multiplier_bootstrap(data, cfg_, rng, exec_).thetas;
}

Decision BootstrapLinear::decide(std::span<const double> x) const {
  if (constant_) return *constant_;
  return consensus_linear(thetas_, x);
}

// ---------------------------------------------------------------------------

}  // namespace cutplane
