#include <cmath>

#include "cutplane/classify.hpp"
#include "cutplane/lp.hpp"

namespace cutplane {

std::vector<Decision> SoftLabeler::decide_batch(const PointSet& points, Exec exec) const {
  std::vector<Decision> out(points.size());
  for_each_index(exec, points.size(), [&](std::size_t i) { out[i] = decide(points.row(i)); });
  return out;
}

std::vector<std::uint8_t> SoftLabeler::cuts(const PointSet& points, Exec exec) const {
  std::vector<std::uint8_t> out(points.size());
  for_each_index(exec, points.size(), [&](std::size_t i) { out[i] = effective_h(points.row(i)); });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct MarginSolution {
  double margin = -1.0;
  Theta theta;
};

// Variables: theta+ (D), theta- (D), mu; theta = theta+ - theta-, margin = mu - 1.
//   -r_i'theta+ + r_i'theta- + mu <= 1   (signed, unit-normalized rows)
//   theta+_j <= 1, theta-_j <= 1, mu <= 2
MarginSolution solve_margin(const PointSet& x_aug, std::span<const double> signs) {
  const std::size_t dim = x_aug.dim();
  const std::size_t cols = 2 * dim + 1;
  const std::size_t rows = x_aug.size() + 2 * dim + 1;
  std::vector<double> a(rows * cols, 0.0), b(rows, 1.0), c(cols, 0.0);
  c[2 * dim] = 1.0;
  for (std::size_t i = 0; i < x_aug.size(); ++i) {
    const auto row = x_aug.row(i);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::invalid_argument("css: zero feature row");
    for (std::size_t j = 0; j < dim; ++j) {
      const double r = signs[i] * row[j] / norm;
      a[i * cols + j] = -r;
      a[i * cols + dim + j] = r;
    }
    a[i * cols + 2 * dim] = 1.0;
  }
  for (std::size_t j = 0; j < 2 * dim; ++j) a[(x_aug.size() + j) * cols + j] = 1.0;
  a[(rows - 1) * cols + 2 * dim] = 1.0;
  b[rows - 1] = 2.0;

  auto res = solve_lp_max(a, rows, b, c);
  if (res.status != LpStatus::optimal) throw std::runtime_error("css: margin LP did not reach optimality");
  MarginSolution out;
  out.margin = res.objective - 1.0;
  out.theta.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) out.theta[j] = res.solution[j] - res.solution[dim + j];
  return out;
}

std::vector<double> label_signs(const LabeledSet& data) {
  std::vector<double> s(data.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = data.labels[i] ? 1.0 : -1.0;
  return s;
}

bool labeling_feasible(const PointSet& x_aug, const std::vector<double>& signs,
                       std::span<const double> query_aug, double query_sign) {
  PointSet xs = x_aug;
  xs.push_back(query_aug);
  auto s = signs;
  s.push_back(query_sign);
  return solve_margin(xs, s).margin > kCssMarginTolerance;
}

std::vector<double> with_bias(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  v.push_back(1.0);
  return v;
}

}  // namespace

double max_separation_margin(const PointSet& x_aug, std::span<const double> signs) {
  if (x_aug.size() != signs.size()) throw std::invalid_argument("css: sign count mismatch");
  return solve_margin(x_aug, signs).margin;
}

VersionSpaceDecision css_linear_decide(const LabeledSet& data, std::span<const double> x) {
  CssLinear css;
  Rng unused(0);
  css.fit(data, unused);
  return css.version_space_decide(x);
}

void CssLinear::fit(const LabeledSet& data, Rng&) {
  if (data.size() == 0) throw std::invalid_argument("css: empty training set");
  x_aug_ = augment_bias(data.features);
  signs_ = label_signs(data);
  if (solve_margin(x_aug_, signs_).margin <= kCssMarginTolerance) {
    throw std::runtime_error("non-realizable sample");
  }
}

VersionSpaceDecision CssLinear::version_space_decide(std::span<const double> x) const {
  if (x.size() + 1 != x_aug_.dim()) throw std::invalid_argument("css: query dimension mismatch");
  const auto q = with_bias(x);
  const bool pos_ok = labeling_feasible(x_aug_, signs_, q, +1.0);
  const bool neg_ok = labeling_feasible(x_aug_, signs_, q, -1.0);
  if (pos_ok && !neg_ok) return VersionSpaceDecision::pos;
  if (neg_ok && !pos_ok) return VersionSpaceDecision::neg;
  return VersionSpaceDecision::disagree;
}

Decision CssLinear::decide(std::span<const double> x) const {
  switch (version_space_decide(x)) {
    case VersionSpaceDecision::pos: return Decision::cut;
    case VersionSpaceDecision::neg: return Decision::keep;
    default: return Decision::abstain;
  }
}

// ---------------------------------------------------------------------------

void OracleSublevel::fit(const LabeledSet& data, Rng&) {
  if (!std::isnan(data.alpha)) alpha_ = data.alpha;
}

Decision OracleSublevel::decide(std::span<const double> x) const {
  return f_(x) > alpha_ ? Decision::cut : Decision::keep;
}

OracleSublevel oracle_sublevel(OracleSublevel::Function f, double alpha) {
  return OracleSublevel(std::move(f), alpha);
}

}  // namespace cutplane
