#include "cutplane/lp.hpp"

#include <limits>
#include <stdexcept>

namespace cutplane {

LpResult solve_lp_max(const std::vector<double>& a, std::size_t rows, const std::vector<double>& b,
                      const std::vector<double>& c, std::size_t max_pivots) {
  const std::size_t n = c.size();
  if (a.size() != rows * n || b.size() != rows) throw std::invalid_argument("lp: shape mismatch");
  for (double v : b) {
    if (v < 0) throw std::invalid_argument("lp: right-hand side must be nonnegative");
  }
  constexpr double kEps = 1e-11;

  // Tableau: rows x (n + rows + 1), slack columns follow the structural ones.
  const std::size_t width = n + rows + 1;
  std::vector<double> tab(rows * width, 0.0);
  std::vector<double> obj(width, 0.0);  // reduced costs, last entry = -objective
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) tab[i * width + j] = a[i * n + j];
    tab[i * width + n + i] = 1.0;
    tab[i * width + width - 1] = b[i];
    basis[i] = n + i;
  }
  for (std::size_t j = 0; j < n; ++j) obj[j] = -c[j];

  LpResult result;
  std::size_t pivots = 0;
  for (;; ++pivots) {
    if (pivots >= max_pivots) {
      result.status = LpStatus::iteration_limit;
      break;
    }
    // Bland: smallest index with negative reduced cost enters.
    std::size_t enter = width;
    for (std::size_t j = 0; j + 1 < width; ++j) {
      if (obj[j] < -kEps) {
        enter = j;
        break;
      }
    }
    if (enter == width) break;

    std::size_t leave = rows;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i) {
      const double coef = tab[i * width + enter];
      if (coef > kEps) {
        const double ratio = tab[i * width + width - 1] / coef;
        if (ratio < best_ratio - kEps ||
            (ratio <= best_ratio + kEps && leave < rows && basis[i] < basis[leave])) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave == rows) {
      result.status = LpStatus::unbounded;
      return result;
    }

    double* prow = &tab[leave * width];
    const double pivot = prow[enter];
    for (std::size_t j = 0; j < width; ++j) prow[j] /= pivot;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == leave) continue;
      double* row = &tab[i * width];
      const double f = row[enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) row[j] -= f * prow[j];
    }
    const double f = obj[enter];
    for (std::size_t j = 0; j < width; ++j) obj[j] -= f * prow[j];
    basis[leave] = enter;
  }

  result.solution.assign(n, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (basis[i] < n) result.solution[basis[i]] = tab[i * width + width - 1];
  }
  result.objective = obj[width - 1];
  return result;
}

}  // namespace cutplane
