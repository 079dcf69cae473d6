#include "cutplane/objectives.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <sys/wait.h>

namespace cutplane {

std::vector<double> Objective::eval_batch(const PointSet& points, Exec exec) const {
  if (points.dim() != dimension() && !points.empty()) {
    throw std::domain_error("eval_batch: point dimension does not match objective");
  }
  std::vector<double> out(points.size());
  // Exceptions must not escape an OpenMP region; capture and rethrow the first.
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for_each_index(exec, points.size(), [&](std::size_t i) {
    if (failed.load(std::memory_order_relaxed)) return;
    try {
      out[i] = value(points.row(i));
      if (!std::isfinite(out[i])) throw std::domain_error("objective returned a non-finite value");
    } catch (...) {
#pragma omp critical(cutplane_eval_failure)
      {
        if (!failure) failure = std::current_exception();
      }
      failed = true;
    }
  });
  if (failure) std::rethrow_exception(failure);
  return out;
}

void require_in_box(std::span<const double> x, double lo, double hi, const char* name) {
  constexpr double kSlack = 1e-12;
  for (double v : x) {
    if (!(v >= lo - kSlack && v <= hi + kSlack)) {
      throw std::domain_error(std::string(name) + ": point outside domain [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
}

double RandomLinear::value(std::span<const double> x) const {
  if (x.size() != w_.size()) throw std::domain_error("random linear: dimension mismatch");
  require_in_box(x, -1.0, 1.0, "random linear");
  return std::inner_product(w_.begin(), w_.end(), x.begin(), 0.0);
}

double RandomLinear::minimum() const {
  double s = 0.0;
  for (double w : w_) s -= std::abs(w);
  return s;
}

std::vector<double> RandomLinear::minimizer() const {
  std::vector<double> x(w_.size());
  for (std::size_t j = 0; j < w_.size(); ++j) x[j] = w_[j] > 0 ? -1.0 : (w_[j] < 0 ? 1.0 : 0.0);
  return x;
}

LinearQuadratic::LinearQuadratic(std::vector<double> w, std::vector<double> a,
                                 std::vector<double> x0, double mix)
    : w_(std::move(w)), a_(std::move(a)), x0_(std::move(x0)), mix_(mix) {
  const auto d = w_.size();
  if (a_.size() != d * d || x0_.size() != d) {
    throw std::invalid_argument("linear quadratic: inconsistent dimensions");
  }
  if (mix_ < 0) throw ConfigError("linear quadratic: mix must be >= 0");
}

double LinearQuadratic::quadratic_part(std::span<const double> x) const {
  const auto d = w_.size();
  std::vector<double> r(d);
  for (std::size_t j = 0; j < d; ++j) r[j] = x[j] - x0_[j];
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double ar = 0.0;
    for (std::size_t j = 0; j < d; ++j) ar += a_[i * d + j] * r[j];
    q += r[i] * ar;
  }
  return q;
}

double LinearQuadratic::value(std::span<const double> x) const {
  if (x.size() != w_.size()) throw std::domain_error("linear quadratic: dimension mismatch");
  require_in_box(x, -1.0, 1.0, "linear quadratic");
  const double lin = std::inner_product(w_.begin(), w_.end(), x.begin(), 0.0);
  if (mix_ == 0.0) return lin;
  return lin + mix_ * quadratic_part(x);
}

std::vector<double> LinearQuadratic::gradient(std::span<const double> x) const {
  const auto d = w_.size();
  std::vector<double> g(w_);
  for (std::size_t i = 0; i < d; ++i) {
    double ar = 0.0;
    for (std::size_t j = 0; j < d; ++j) ar += a_[i * d + j] * (x[j] - x0_[j]);
    g[i] += 2.0 * mix_ * ar;
  }
  return g;
}

RandomLinear gen_random_linear(std::size_t d, Rng& rng) {
  if (d == 0) throw ConfigError("random linear: d must be >= 1");
  std::normal_distribution<double> normal;
  std::vector<double> w(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : w) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : w) v /= norm;
  return RandomLinear(std::move(w));
}

LinearQuadratic gen_linear_quadratic(std::size_t d, double mix, Rng& rng) {
  if (mix < 0) throw ConfigError("linear quadratic: mix must be >= 0");
  auto lin = gen_random_linear(d, rng);
  std::normal_distribution<double> normal;
  std::vector<double> g(d * d);
  for (auto& v : g) v = normal(rng);
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += g[k * d + i] * g[k * d + j];
      a[i * d + j] = s / static_cast<double>(d);
    }
  }
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> x0(d);
  for (auto& v : x0) v = unif(rng);
  return LinearQuadratic(lin.weights(), std::move(a), std::move(x0), mix);
}

// Dixon & Szego (1978) test-function parameter tables.
namespace {

constexpr std::array<std::array<double, 4>, 10> kShekelA{{
    {4, 4, 4, 4},
    {1, 1, 1, 1},
    {8, 8, 8, 8},
    {6, 6, 6, 6},
    {3, 7, 3, 7},
    {2, 9, 2, 9},
    {5, 5, 3, 3},
    {8, 1, 8, 1},
    {6, 2, 6, 2},
    {7, 3.6, 7, 3.6},
}};
constexpr std::array<double, 10> kShekelC{0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5};

constexpr std::array<double, 4> kHartmannAlpha{1.0, 1.2, 3.0, 3.2};
constexpr std::array<std::array<double, 6>, 4> kHartmannA{{
    {10, 3, 17, 3.5, 1.7, 8},
    {0.05, 10, 17, 0.1, 8, 14},
    {3, 3.5, 1.7, 10, 17, 8},
    {17, 8, 0.05, 10, 0.1, 14},
}};
constexpr std::array<std::array<double, 6>, 4> kHartmannP{{
    {0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
    {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
    {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
    {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381},
}};

}  // namespace

double shekel4(std::span<const double> x) {
  if (x.size() != 4) throw std::domain_error("shekel4: expects a 4-vector");
  require_in_box(x, 0.0, 10.0, "shekel4");
  double f = 0.0;
  for (std::size_t i = 0; i < kShekelA.size(); ++i) {
    double s = kShekelC[i];
    for (std::size_t j = 0; j < 4; ++j) s += (x[j] - kShekelA[i][j]) * (x[j] - kShekelA[i][j]);
    f -= 1.0 / s;
  }
  return f;
}

double hartmann6(std::span<const double> x) {
  if (x.size() != 6) throw std::domain_error("hartmann6: expects a 6-vector");
  require_in_box(x, 0.0, 1.0, "hartmann6");
  double f = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double r = x[j] - kHartmannP[i][j];
      s += kHartmannA[i][j] * r * r;
    }
    f -= kHartmannAlpha[i] * std::exp(-s);
  }
  return f;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};

int base_code(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return -1;
  }
}

void require_kmer(const std::string& seq) {
  if (seq.size() != kKmer) throw std::invalid_argument("sequence must have length 8: " + seq);
  for (char c : seq) {
    if (base_code(c) < 0) throw std::invalid_argument("invalid base in sequence: " + seq);
  }
}

}  // namespace

std::array<double, kPbmFeatures> encode_kmer(const std::string& seq) {
  require_kmer(seq);
  std::array<double, kPbmFeatures> f{};
  for (std::size_t p = 0; p < kKmer; ++p) f[4 * p + static_cast<std::size_t>(base_code(seq[p]))] = 1.0;
  return f;
}

std::size_t kmer_index(const std::string& seq) {
  require_kmer(seq);
  std::size_t idx = 0;
  for (char c : seq) idx = idx * 4 + static_cast<std::size_t>(base_code(c));
  return idx;
}

std::string kmer_from_index(std::size_t index) {
  if (index >= kAllKmers) throw std::out_of_range("kmer index out of range");
  std::string s(kKmer, 'A');
  for (std::size_t p = kKmer; p-- > 0;) {
    s[p] = kBases[index % 4];
    index /= 4;
  }
  return s;
}

ActionSpace PbmProblem::space() const { return ActionSpace::discrete(sequences, features); }

PbmProblem parse_pbm(std::istream& in) {
  PbmProblem out;
  out.features = PointSet(kPbmFeatures);
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string seq, value_text, extra;
    if (!(fields >> seq >> value_text) || (fields >> extra)) {
      throw std::runtime_error("PBM line " + std::to_string(lineno) + ": expected two columns");
    }
    double value = 0.0;
    std::size_t consumed = 0;
    bool numeric = true;
    try {
      value = std::stod(value_text, &consumed);
      numeric = consumed == value_text.size() && std::isfinite(value);
    } catch (const std::exception&) {
      numeric = false;
    }
    if (!numeric) {
      if (lineno == 1 && out.sequences.empty()) continue;  // header row
      throw std::runtime_error("PBM line " + std::to_string(lineno) + ": invalid affinity '" +
                               value_text + "'");
    }
    for (auto& c : seq) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    try {
      require_kmer(seq);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("PBM line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.emplace(seq, lineno).second) {
      throw std::runtime_error("PBM line " + std::to_string(lineno) + ": duplicate action " + seq);
    }
    const auto f = encode_kmer(seq);
    out.features.push_back(f);
    out.sequences.push_back(seq);
    out.affinities.push_back(value);
  }
  return out;
}

PbmProblem load_pbm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open PBM file " + path.string());
  return parse_pbm(in);
}

SyntheticPbm gen_synthetic_pbm(Rng& rng, double noise_frac) {
  SyntheticPbm out;
  std::normal_distribution<double> normal;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto& row : out.pwm) {
    for (auto& w : row) {
      w = normal(rng);
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  }
  out.noise_sd = noise_frac * (hi - lo);
  std::normal_distribution<double> noise(0.0, out.noise_sd > 0 ? out.noise_sd : 1.0);
  auto& prob = out.problem;
  prob.features = PointSet(kPbmFeatures);
  prob.features.reserve(kAllKmers);
  prob.sequences.reserve(kAllKmers);
  prob.affinities.reserve(kAllKmers);
  for (std::size_t idx = 0; idx < kAllKmers; ++idx) {
    auto seq = kmer_from_index(idx);
    double a = 0.0;
    for (std::size_t p = 0; p < kKmer; ++p) a += out.pwm[p][static_cast<std::size_t>(base_code(seq[p]))];
    if (out.noise_sd > 0) a += noise(rng);
    prob.features.push_back(encode_kmer(seq));
    prob.sequences.push_back(std::move(seq));
    prob.affinities.push_back(a);
  }
  return out;
}

PbmObjective::PbmObjective(const PbmProblem& problem) {
  table_.reserve(problem.sequences.size());
  for (std::size_t i = 0; i < problem.sequences.size(); ++i) {
    table_.emplace(kmer_index(problem.sequences[i]), -problem.affinities[i]);
  }
}

double PbmObjective::value(std::span<const double> x) const {
  if (x.size() != kPbmFeatures) throw std::domain_error("pbm: expects 32 features");
  std::size_t idx = 0;
  for (std::size_t p = 0; p < kKmer; ++p) {
    int base = -1;
    for (int b = 0; b < 4; ++b) {
      const double v = x[4 * p + static_cast<std::size_t>(b)];
      if (v == 1.0) {
        if (base >= 0) throw std::domain_error("pbm: not a one-hot 8-mer encoding");
        base = b;
      } else if (v != 0.0) {
        throw std::domain_error("pbm: not a one-hot 8-mer encoding");
      }
    }
    if (base < 0) throw std::domain_error("pbm: not a one-hot 8-mer encoding");
    idx = idx * 4 + static_cast<std::size_t>(base);
  }
  auto it = table_.find(idx);
  if (it == table_.end()) throw std::domain_error("pbm: sequence not in table");
  return it->second;
}

// ---------------------------------------------------------------------------

SubprocessObjective::SubprocessObjective(SubprocessObjectiveSpec spec) : spec_(std::move(spec)) {
  if (spec_.command.empty()) throw ConfigError("subprocess objective: empty command");
  if (spec_.dimension == 0) throw ConfigError("subprocess objective: dimension must be >= 1");
  if (!spec_.lo.empty() && (spec_.lo.size() != spec_.dimension || spec_.hi.size() != spec_.dimension)) {
    throw ConfigError("subprocess objective: domain box does not match dimension");
  }
}

double SubprocessObjective::value(std::span<const double> x) const {
  PointSet one(x.size());
  one.push_back(x);
  return eval_batch(one).front();
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::filesystem::path scratch_path(const char* tag) {
  static std::atomic<unsigned> counter{0};
  return std::filesystem::temp_directory_path() /
         ("cutplane-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "." + tag);
}

}  // namespace

std::vector<double> SubprocessObjective::eval_batch(const PointSet& points, Exec) const {
  if (points.empty()) return {};
  if (points.dim() != spec_.dimension) throw std::domain_error("subprocess: dimension mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; !spec_.lo.empty() && j < spec_.dimension; ++j) {
      const double v = points.row(i)[j];
      if (!(v >= spec_.lo[j] && v <= spec_.hi[j])) throw std::domain_error("subprocess: point outside domain");
    }
  }

  std::lock_guard lock(mutex_);
  const auto in_path = scratch_path("in");
  const auto out_path = scratch_path("out");
  {
    std::ofstream in(in_path);
    in << std::setprecision(17);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto row = points.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) in << (j ? " " : "") << row[j];
      in << '\n';
    }
  }
  std::ostringstream cmd;
  cmd << "timeout " << spec_.timeout_seconds << " /bin/sh -c " << shell_quote(spec_.command)
      << " < " << shell_quote(in_path.string()) << " > " << shell_quote(out_path.string());
  const int status = std::system(cmd.str().c_str());
  const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;

  std::vector<double> out(points.size(), spec_.error_value);
  if (code != 0) {
    ++failures_;
    std::cerr << "warning: objective command " << (code == 124 ? "timed out" : "failed")
              << " (exit " << code << "); substituting error value\n";
  } else {
    std::ifstream result(out_path);
    std::string line;
    std::size_t i = 0;
    for (; i < points.size() && std::getline(result, line); ++i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(line, &used);
        if (std::isfinite(v) && line.find_first_not_of(" \t\r", used) == std::string::npos) {
          out[i] = v;
          continue;
        }
      } catch (const std::exception&) {
      }
      ++failures_;
      std::cerr << "warning: unparseable objective output line " << (i + 1) << "\n";
    }
    if (i < points.size()) {
      ++failures_;
      std::cerr << "warning: objective command returned " << i << " of " << points.size()
                << " values\n";
    }
  }
  std::error_code ec;
  std::filesystem::remove(in_path, ec);
  std::filesystem::remove(out_path, ec);
  return out;
}

}  // namespace cutplane
