// Dense primal simplex for small LPs of the form
//   maximize c'v  subject to  A v <= b,  v >= 0,  with b >= 0,
// so the origin is always a feasible starting basis.
#pragma once

#include <cstddef>
#include <vector>

namespace cutplane {

enum class LpStatus { optimal, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  double objective = 0.0;
  std::vector<double> solution;
};

/// `a` is row-major with `rows` rows and c.size() columns. Uses Bland's rule.
LpResult solve_lp_max(const std::vector<double>& a, std::size_t rows, const std::vector<double>& b,
                      const std::vector<double>& c, std::size_t max_pivots = 100000);

}  // namespace cutplane
