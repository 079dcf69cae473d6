#include "cutplane/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace cutplane {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng SeedPolicy::make_rng() const {
  // Replicate r of an experiment runs from seed base_seed + r.
  return Rng(splitmix64(base_seed + replicate_index));
}

Rng child_rng(Rng& parent) { return Rng(splitmix64(parent())); }

PointSet::PointSet(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw std::invalid_argument("PointSet: data size is not a multiple of dimension");
  }
}

void PointSet::push_back(std::span<const double> x) {
  if (dim_ == 0) dim_ = x.size();
  if (x.size() != dim_) throw std::invalid_argument("PointSet: dimension mismatch");
  data_.insert(data_.end(), x.begin(), x.end());
}

void PointSet::append(const PointSet& other) {
  if (other.empty()) return;
  if (dim_ == 0) dim_ = other.dim_;
  if (other.dim_ != dim_) throw std::invalid_argument("PointSet: dimension mismatch");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

ActionSpace ActionSpace::discrete(std::vector<std::string> ids, PointSet points) {
  if (ids.size() != points.size()) {
    throw ConfigError("discrete space: id count does not match point count");
  }
  if (points.size() < 2) throw ConfigError("discrete space needs at least 2 points");
  std::set<std::string> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw ConfigError("discrete space: duplicate action id");
  return ActionSpace(DiscreteSpace{std::move(ids), std::move(points)});
}

ActionSpace ActionSpace::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.empty() || lo.size() != hi.size()) {
    throw ConfigError("box space: lo/hi must be nonempty and equal length");
  }
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (!(lo[j] < hi[j])) throw ConfigError("box space: lo[j] < hi[j] violated");
  }
  return ActionSpace(BoxSpace{std::move(lo), std::move(hi)});
}

std::size_t ActionSpace::dimension() const {
  if (is_discrete()) return as_discrete().points.dim();
  return as_box().lo.size();
}

Observation make_observation(std::vector<double> x, double y, std::size_t index) {
  if (!std::isfinite(y)) throw std::domain_error("objective returned a non-finite value");
  return Observation{std::move(x), y, index};
}

bool LabeledSet::has_both_classes() const {
  bool zero = false, one = false;
  for (auto z : labels) (z ? one : zero) = true;
  return zero && one;
}

double median_threshold(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty batch");
  std::vector<double> v(values.begin(), values.end());
  for (double y : v) {
    if (!std::isfinite(y)) throw std::domain_error("median_threshold: non-finite value");
  }
  auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

LabeledSet relabel_history(std::span<const Observation> history, double alpha) {
  if (history.empty()) throw std::invalid_argument("relabel_history: empty history");
  LabeledSet out;
  out.features = PointSet(history.front().x.size());
  out.features.reserve(history.size());
  out.labels.reserve(history.size());
  for (const auto& obs : history) {
    out.features.push_back(obs.x);
    out.labels.push_back(obs.y > alpha ? 1 : 0);
  }
  out.alpha = alpha;
  return out;
}

std::size_t RunTrace::evaluations() const {
  std::size_t total = 0;
  for (const auto& r : rounds) total += r.values.size();
  return total;
}

std::vector<double> best_so_far(const RunTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.rounds.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.rounds) {
    for (double y : r.values) best = std::min(best, y);
    out.push_back(best);
  }
  return out;
}

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string trace_to_jsonl(const RunTrace& trace) {
  std::ostringstream os;
  json header = {
      {"kind", "header"},
      {"method", trace.method},
      {"base_seed", trace.seed.base_seed},
      {"replicate", trace.seed.replicate_index},
      {"eta", trace.eta},
      {"space_size", trace.space_size},
      {"x_star", trace.x_star ? json(*trace.x_star) : json(nullptr)},
      {"config", trace.config},
  };
  os << header.dump() << '\n';
  for (const auto& r : trace.rounds) {
    json j = {
        {"kind", "round"},
        {"t", r.t},
        {"dim", r.points.dim()},
        {"points", r.points.data()},
        {"values", r.values},
        {"alpha", optional_number(r.alpha)},
        {"coverage", optional_number(r.coverage)},
        {"best_so_far", r.best_so_far},
    };
    if (!r.indices.empty()) j["indices"] = r.indices;
    if (!r.cuts.empty()) j["cuts"] = r.cuts;
    if (r.ess) j["ess"] = *r.ess;
    if (r.bandwidth_scale) j["bandwidth_scale"] = *r.bandwidth_scale;
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    os << j.dump() << '\n';
  }
  json footer = {{"kind", "result"},
                 {"final_x", trace.final_x},
                 {"final_y", std::isfinite(trace.final_y) ? json(trace.final_y) : json(nullptr)},
                 {"error", trace.error}};
  os << footer.dump() << '\n';
  return os.str();
}

RunTrace trace_from_jsonl(const std::string& text) {
  RunTrace trace;
  std::istringstream is(text);
  std::string line;
  bool saw_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "header") {
      saw_header = true;
      trace.method = j.at("method").get<std::string>();
      trace.seed.base_seed = j.at("base_seed").get<std::uint64_t>();
      trace.seed.replicate_index = j.at("replicate").get<std::uint64_t>();
      trace.eta = j.at("eta").get<double>();
      trace.space_size = j.at("space_size").get<std::size_t>();
      if (!j.at("x_star").is_null()) trace.x_star = j.at("x_star").get<std::size_t>();
      trace.config = j.at("config");
    } else if (kind == "round") {
      RoundRecord r;
      r.t = j.at("t").get<int>();
      const auto dim = j.at("dim").get<std::size_t>();
      auto pts = j.at("points").get<std::vector<double>>();
      r.points = dim == 0 ? PointSet() : PointSet(dim, std::move(pts));
      r.values = j.at("values").get<std::vector<double>>();
      r.alpha = read_optional(j, "alpha");
      r.coverage = read_optional(j, "coverage");
      r.best_so_far = j.at("best_so_far").get<double>();
      if (j.contains("indices")) r.indices = j.at("indices").get<std::vector<std::size_t>>();
      if (j.contains("cuts")) r.cuts = j.at("cuts").get<std::vector<std::uint8_t>>();
      r.ess = read_optional(j, "ess");
      r.bandwidth_scale = read_optional(j, "bandwidth_scale");
      if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
      trace.rounds.push_back(std::move(r));
    } else if (kind == "result") {
      trace.final_x = j.at("final_x").get<std::vector<double>>();
      trace.final_y = j.at("final_y").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : j.at("final_y").get<double>();
      trace.error = j.at("error").get<std::string>();
    } else {
      throw std::runtime_error("trace: unknown record kind '" + kind + "'");
    }
  }
  if (!saw_header) throw std::runtime_error("trace: missing header line");
  return trace;
}

}  // namespace cutplane
