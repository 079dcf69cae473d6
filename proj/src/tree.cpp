#include <algorithm>
#include <cmath>
#include <numeric>

#include "cutplane/classify.hpp"

namespace cutplane {

void TreeEnsembleConfig::validate() const {
  if (n_trees < 1) throw ConfigError("tree ensemble: n_trees must be >= 1");
  if (!(consensus_tau > 0.5 && consensus_tau <= 1.0)) {
    throw ConfigError("tree ensemble: consensus_tau must lie in (0.5, 1]");
  }
  if (min_leaf < 1) throw ConfigError("tree ensemble: min_leaf must be >= 1");
  if (max_depth < 0) throw ConfigError("tree ensemble: max_depth must be >= 0");
  if (feature_fraction < 0.0 || feature_fraction > 1.0) {
    throw ConfigError("tree ensemble: feature_fraction must lie in [0, 1]");
  }
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

// Weighted Gini impurity scaled by node size: 2 * n1 * n0 / n.
inline double gini_mass(double ones, double total) {
  return total > 0 ? 2.0 * ones * (total - ones) / total : 0.0;
}

void best_split_on_feature(const PointSet& x, std::span<const std::uint8_t> z,
                           std::span<const std::size_t> rows, std::size_t feature, int min_leaf,
                           std::vector<std::pair<double, std::uint8_t>>& scratch, Split& best) {
  scratch.clear();
  for (auto r : rows) scratch.emplace_back(x.row(r)[feature], z[r]);
  std::sort(scratch.begin(), scratch.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const double total = static_cast<double>(scratch.size());
  double ones_total = 0.0;
  for (const auto& s : scratch) ones_total += s.second;

  double left_ones = 0.0;
  for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
    left_ones += scratch[i].second;
    if (!(scratch[i].first < scratch[i + 1].first)) continue;
    const double nl = static_cast<double>(i + 1);
    const double nr = total - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double score = gini_mass(left_ones, nl) + gini_mass(ones_total - left_ones, nr);
    // Strict improvement keeps the lowest feature index, then the lowest threshold.
    if (score < best.score - 1e-12) {
      best.score = score;
      best.feature = static_cast<int>(feature);
      best.threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
      if (best.threshold >= scratch[i + 1].first) best.threshold = scratch[i].first;
    }
  }
}

}  // namespace

void DecisionTree::fit(const PointSet& x, std::span<const std::uint8_t> z,
                       std::vector<std::size_t> rows, std::size_t features_per_split,
                       int max_depth, int min_leaf, Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("decision tree: no training rows");
  nodes_.clear();
  features_per_split = std::clamp<std::size_t>(features_per_split, 1, x.dim());
  build(x, z, rows, 0, rows.size(), 0, features_per_split, max_depth, min_leaf, rng);
}

int DecisionTree::build(const PointSet& x, std::span<const std::uint8_t> z,
                        std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                        int depth, std::size_t features_per_split, int max_depth, int min_leaf,
                        Rng& rng) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  std::size_t ones = 0;
  for (std::size_t i = begin; i < end; ++i) ones += z[rows[i]];
  const std::size_t count = end - begin;
  nodes_[id].label = (2 * ones > count) ? 1 : 0;

  const bool pure = ones == 0 || ones == count;
  const bool depth_capped = max_depth > 0 && depth >= max_depth;
  if (pure || depth_capped || count < 2 * static_cast<std::size_t>(min_leaf)) return id;

  const std::size_t d = x.dim();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(features_per_split));
  std::sort(chosen.begin(), chosen.end());

  std::span<const std::size_t> node_rows(rows.data() + begin, count);
  std::vector<std::pair<double, std::uint8_t>> scratch;
  scratch.reserve(count);
  Split best;
  for (auto f : chosen) best_split_on_feature(x, z, node_rows, f, min_leaf, scratch, best);
  // All sampled features constant on this node: keep drawing the rest.
  for (std::size_t k = features_per_split; best.feature < 0 && k < d; ++k) {
    best_split_on_feature(x, z, node_rows, order[k], min_leaf, scratch, best);
  }
  if (best.feature < 0) return id;

  const auto f = static_cast<std::size_t>(best.feature);
  const double thr = best.threshold;
  auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(end),
                                   [&](std::size_t r) { return x.row(r)[f] <= thr; });
  const auto split_at = static_cast<std::size_t>(mid - rows.begin());

  nodes_[id].feature = best.feature;
  nodes_[id].threshold = thr;
  const int left = build(x, z, rows, begin, split_at, depth + 1, features_per_split, max_depth, min_leaf, rng);
  const int right = build(x, z, rows, split_at, end, depth + 1, features_per_split, max_depth, min_leaf, rng);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::uint8_t DecisionTree::predict(std::span<const double> x) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const auto& n = nodes_[id];
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[id].label;
}

int DecisionTree::depth() const {
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[id].feature >= 0) {
      stack.emplace_back(nodes_[id].left, d + 1);
      stack.emplace_back(nodes_[id].right, d + 1);
    }
  }
  return deepest;
}

TreeEnsemble::TreeEnsemble(TreeEnsembleConfig cfg, Exec exec) : cfg_(cfg), exec_(exec) {
  cfg_.validate();
}

void TreeEnsemble::fit(const LabeledSet& data, Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("tree ensemble: empty training set");
  const std::size_t d = data.features.dim();
  const double frac = cfg_.feature_fraction > 0 ? cfg_.feature_fraction
                                                 : std::sqrt(static_cast<double>(d)) / static_cast<double>(d);
  const auto per_split = static_cast<std::size_t>(
      std::max(1.0, std::round(frac * static_cast<double>(d))));

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg_.n_trees));
  for (auto& s : seeds) s = rng();

  trees_.assign(seeds.size(), DecisionTree{});
  const std::size_t n = data.size();
  for_each_index(exec_, seeds.size(), [&](std::size_t t) {
    Rng tree_rng(splitmix64(seeds[t]));
    std::vector<std::size_t> rows(n);
    if (cfg_.bootstrap_rows) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(tree_rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees_[t].fit(data.features, data.labels, std::move(rows), per_split, cfg_.max_depth,
                  cfg_.min_leaf, tree_rng);
  });
}

int TreeEnsemble::votes_for_cut(std::span<const double> x) const {
  int votes = 0;
  for (const auto& t : trees_) votes += t.predict(x);
  return votes;
}

Decision TreeEnsemble::decide(std::span<const double> x) const {
  return consensus_from_votes(votes_for_cut(x), static_cast<int>(trees_.size()), cfg_.consensus_tau);
}

TreeEnsemble fit_tree_ensemble(const LabeledSet& data, const TreeEnsembleConfig& cfg, Rng& rng, Exec exec) {
  TreeEnsemble e(cfg, exec);
  e.fit(data, rng);
  return e;
}

Decision consensus_from_votes(int votes_for_cut, int voters, double tau) {
  const double need = tau * voters - 1e-9;
  if (votes_for_cut >= need) return Decision::cut;
  if (voters - votes_for_cut >= need) return Decision::keep;
  return Decision::abstain;
}

Decision consensus_decide(const TreeEnsemble& ensemble, std::span<const double> x, double tau) {
  return consensus_from_votes(ensemble.votes_for_cut(x), static_cast<int>(ensemble.trees().size()), tau);
}

}  // namespace cutplane
