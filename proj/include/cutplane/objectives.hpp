// Benchmark objectives, synthetic problem generators, PBM-style 8-mer tables
// and an adapter that evaluates batches through an external process.
#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cutplane/core.hpp"
#include "cutplane/parallel.hpp"

namespace cutplane {

class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dimension() const = 0;
  /// Throws std::domain_error for points outside the objective's domain.
  virtual double value(std::span<const double> x) const = 0;
  /// One finite value per row.
  virtual std::vector<double> eval_batch(const PointSet& points, Exec exec = Exec::omp) const;
  virtual bool is_pure() const { return true; }
};

/// f(x) = w'x on [-1,1]^d.
class RandomLinear : public Objective {
 public:
  explicit RandomLinear(std::vector<double> w) : w_(std::move(w)) {}
  std::size_t dimension() const override { return w_.size(); }
  double value(std::span<const double> x) const override;
  const std::vector<double>& weights() const { return w_; }
  /// -||w||_1, attained at x_j = -sign(w_j).
  double minimum() const;
  std::vector<double> minimizer() const;

 private:
  std::vector<double> w_;
};

/// f(x) = w'x + mix * (x - x0)' A (x - x0) on [-1,1]^d, A = G'G/d.
class LinearQuadratic : public Objective {
 public:
  LinearQuadratic(std::vector<double> w, std::vector<double> a, std::vector<double> x0, double mix);
  std::size_t dimension() const override { return w_.size(); }
  double value(std::span<const double> x) const override;
  double quadratic_part(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;

  const std::vector<double>& weights() const { return w_; }
  double mix() const { return mix_; }

 private:
  std::vector<double> w_;
  std::vector<double> a_;  // row-major d x d
  std::vector<double> x0_;
  double mix_;
};

RandomLinear gen_random_linear(std::size_t d, Rng& rng);
LinearQuadratic gen_linear_quadratic(std::size_t d, double mix, Rng& rng);

/// Shekel m=10 on [0,10]^4 (Dixon-Szego parameters).
double shekel4(std::span<const double> x);
/// Hartmann on [0,1]^6 (Dixon-Szego parameters).
double hartmann6(std::span<const double> x);

class Shekel4 : public Objective {
 public:
  std::size_t dimension() const override { return 4; }
  double value(std::span<const double> x) const override { return shekel4(x); }
};

class Hartmann6 : public Objective {
 public:
  std::size_t dimension() const override { return 6; }
  double value(std::span<const double> x) const override { return hartmann6(x); }
};

// ---------------------------------------------------------------------------
// PBM-style 8-mer problems

inline constexpr std::size_t kKmer = 8;
inline constexpr std::size_t kPbmFeatures = 4 * kKmer;
inline constexpr std::size_t kAllKmers = 65536;

/// One-hot encoding: feature 4*pos + base for bases ordered A, C, G, T.
std::array<double, kPbmFeatures> encode_kmer(const std::string& seq);
/// Position in the lexicographic enumeration of all 8-mers (A < C < G < T).
std::size_t kmer_index(const std::string& seq);
std::string kmer_from_index(std::size_t index);

struct PbmProblem {
  std::vector<std::string> sequences;
  std::vector<double> affinities;
  PointSet features;

  ActionSpace space() const;
};

PbmProblem load_pbm(const std::filesystem::path& path);
PbmProblem parse_pbm(std::istream& in);

struct SyntheticPbm {
  PbmProblem problem;
  std::array<std::array<double, 4>, kKmer> pwm{};  // position weight matrix
  double noise_sd = 0.0;
};

/// affinity(seq) = sum_pos W[pos][base] + eps, eps ~ N(0, noise_frac * range(W)).
SyntheticPbm gen_synthetic_pbm(Rng& rng, double noise_frac = 0.01);

/// Objective = negative affinity, looked up by decoding the one-hot features.
class PbmObjective : public Objective {
 public:
  explicit PbmObjective(const PbmProblem& problem);
  std::size_t dimension() const override { return kPbmFeatures; }
  double value(std::span<const double> x) const override;

 private:
  std::unordered_map<std::size_t, double> table_;
};

// ---------------------------------------------------------------------------
// External process adapter

struct SubprocessObjectiveSpec {
  std::string command;  // run through /bin/sh
  std::size_t dimension = 0;
  double error_value = 0.0;
  double timeout_seconds = 600.0;
  std::vector<double> lo, hi;  // optional domain box
};

/// Points go to the child's stdin one per line, values come back one per line.
class SubprocessObjective : public Objective {
 public:
  explicit SubprocessObjective(SubprocessObjectiveSpec spec);
  std::size_t dimension() const override { return spec_.dimension; }
  double value(std::span<const double> x) const override;
  std::vector<double> eval_batch(const PointSet& points, Exec exec = Exec::omp) const override;
  bool is_pure() const override { return false; }
  std::size_t failures() const { return failures_; }

 private:
  SubprocessObjectiveSpec spec_;
  mutable std::mutex mutex_;
  mutable std::size_t failures_ = 0;
};

/// Domain checks shared by the box objectives.
void require_in_box(std::span<const double> x, double lo, double hi, const char* name);

}  // namespace cutplane
