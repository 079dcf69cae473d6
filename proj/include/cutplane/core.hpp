// Domain model shared by every cutplane module: points, action spaces,
// observations, labeled data, run traces and the seeding contract.
#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cutplane {

/// Raised for invalid user-facing configuration (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic generator derivation: (base_seed, replicate_index) -> Rng.
struct SeedPolicy {
  std::uint64_t base_seed = 0;
  std::uint64_t replicate_index = 0;

  Rng make_rng() const;
};

/// Independent child stream; consumes exactly one draw from the parent.
Rng child_rng(Rng& parent);

/// Dense row-major set of equal-dimension points.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> x);
  void append(const PointSet& other);
  void reserve(std::size_t rows) { data_.reserve(rows * dim_); }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const PointSet&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct DiscreteSpace {
  std::vector<std::string> ids;
  PointSet points;
};

struct BoxSpace {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// The domain the optimizer samples from: a finite featurized point set or a box.
class ActionSpace {
 public:
  static ActionSpace discrete(std::vector<std::string> ids, PointSet points);
  static ActionSpace box(std::vector<double> lo, std::vector<double> hi);

  bool is_discrete() const { return std::holds_alternative<DiscreteSpace>(space_); }
  std::size_t dimension() const;
  const DiscreteSpace& as_discrete() const { return std::get<DiscreteSpace>(space_); }
  const BoxSpace& as_box() const { return std::get<BoxSpace>(space_); }

 private:
  explicit ActionSpace(std::variant<DiscreteSpace, BoxSpace> s) : space_(std::move(s)) {}
  std::variant<DiscreteSpace, BoxSpace> space_;
};

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct Observation {
  std::vector<double> x;
  double y = 0.0;
  std::size_t index = kNoIndex;  // position in a discrete space, if any
};

/// Throws std::domain_error when y is NaN or infinite.
Observation make_observation(std::vector<double> x, double y, std::size_t index = kNoIndex);

/// Training data for one round's classifier. `alpha` is the threshold that
/// produced the labels (NaN when labels came from another source).
struct LabeledSet {
  PointSet features;
  std::vector<std::uint8_t> labels;
  double alpha = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return labels.size(); }
  bool has_both_classes() const;
};

enum class ThresholdPolicy { latest_batch, all_history };

/// Lower median: element at index floor((k-1)/2) of the sorted values.
double median_threshold(std::span<const double> values);

/// z_i = 1 iff y_i > alpha (strict).
LabeledSet relabel_history(std::span<const Observation> history, double alpha);

struct RoundRecord {
  int t = 0;
  PointSet points;
  std::vector<std::size_t> indices;  // discrete spaces only
  std::vector<double> values;
  std::optional<double> alpha;
  std::optional<double> coverage;
  double best_so_far = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> cuts;  // per-point effective h, when logging is on
  std::optional<double> ess;
  std::optional<double> bandwidth_scale;
  std::vector<std::string> warnings;
};

struct RunTrace {
  std::string method;
  nlohmann::json config;
  SeedPolicy seed;
  double eta = 0.0;
  std::size_t space_size = 0;  // |X| for discrete spaces, 0 otherwise
  std::optional<std::size_t> x_star;
  std::vector<RoundRecord> rounds;
  // argmin over the final batch
  std::vector<double> final_x;
  double final_y = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // non-empty when the run aborted with a partial trace

  std::size_t evaluations() const;
};

/// Element t is the minimum observed value through round t.
std::vector<double> best_so_far(const RunTrace& trace);

/// JSON-lines encoding: one header line followed by one line per round.
std::string trace_to_jsonl(const RunTrace& trace);
RunTrace trace_from_jsonl(const std::string& text);

}  // namespace cutplane
