#include "cutplane/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace cutplane {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

namespace {

// Reads keys from a JSON object and rejects any key that was never read.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Section() = default;

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return as<T>(key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + ": key '" + key + "' has the wrong type");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

MethodKind parse_method_kind(const std::string& s) {
  if (s == "classify-rf") return MethodKind::classify_rf;
  if (s == "classify-tuned") return MethodKind::classify_tuned;
  if (s == "css") return MethodKind::css;
  if (s == "oracle") return MethodKind::oracle;
  if (s == "pairwise") return MethodKind::pairwise;
  if (s == "random") return MethodKind::random;
  if (s == "random-2x") return MethodKind::random2x;
  throw ConfigError("unknown method '" + s + "'");
}

MethodSpec parse_method(const json& j) {
  MethodSpec m;
  if (j.is_string()) {
    m.name = j.get<std::string>();
    m.kind = parse_method_kind(m.name);
    if (m.kind == MethodKind::pairwise) m.name = "pairwise-c10";
    return m;
  }
  Section s(j, "methods[]");
  m.kind = parse_method_kind(s.require<std::string>("method"));
  m.pairwise_c = s.get<int>("c", 10);
  m.pairwise_base = parse_method_kind(s.get<std::string>("base", "classify-rf"));
  if (m.kind == MethodKind::pairwise) {
    if (m.pairwise_c < 1) throw ConfigError("pairwise: c must be >= 1");
    if (m.pairwise_base == MethodKind::pairwise || m.pairwise_base == MethodKind::random ||
        m.pairwise_base == MethodKind::random2x) {
      throw ConfigError("pairwise: base must be a classifier method");
    }
  }
  std::string fallback = s.get<std::string>("method", "");
  if (m.kind == MethodKind::pairwise) fallback = "pairwise-c" + std::to_string(m.pairwise_c);
  m.name = s.get<std::string>("name", fallback);
  s.finish();
  return m;
}

ThresholdPolicy parse_threshold(const std::string& s) {
  if (s == "latest-batch") return ThresholdPolicy::latest_batch;
  if (s == "all-history") return ThresholdPolicy::all_history;
  throw ConfigError("unknown threshold_policy '" + s + "'");
}

std::vector<double> read_points_file(const std::filesystem::path& path, std::size_t& dim) {
  std::istringstream in(read_file(path));
  std::vector<double> data;
  std::string line;
  dim = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::vector<double> row;
    double v;
    while (fields >> v) row.push_back(v);
    if (row.empty()) continue;
    if (dim == 0) dim = row.size();
    if (row.size() != dim) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    data.insert(data.end(), row.begin(), row.end());
  }
  if (dim == 0) throw ConfigError(path.string() + ": no points");
  return data;
}

std::vector<std::string> numbered_ids(std::size_t count) {
  std::vector<std::string> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = std::to_string(i);
  return ids;
}

}  // namespace

Problem make_problem(const json& spec) {
  Section s(spec, "problem");
  Problem p;
  p.kind = s.require<std::string>("kind");
  const auto seed = s.get<std::uint64_t>("seed", 0);
  Rng rng(splitmix64(seed));

  auto unit_box = [](std::size_t d) {
    return ActionSpace::box(std::vector<double>(d, -1.0), std::vector<double>(d, 1.0));
  };

  if (p.kind == "random_linear") {
    const auto d = s.require<std::size_t>("d");
    if (d < 1) throw ConfigError("problem.d must be >= 1");
    p.objective = std::make_shared<RandomLinear>(gen_random_linear(d, rng));
    p.space = unit_box(d);
  } else if (p.kind == "linear_quadratic") {
    const auto d = s.require<std::size_t>("d");
    if (d < 1) throw ConfigError("problem.d must be >= 1");
    const auto mix = s.get<double>("mix", 1.0);
    p.objective = std::make_shared<LinearQuadratic>(gen_linear_quadratic(d, mix, rng));
    p.space = unit_box(d);
  } else if (p.kind == "shekel4") {
    p.objective = std::make_shared<Shekel4>();
    p.space = ActionSpace::box(std::vector<double>(4, 0.0), std::vector<double>(4, 10.0));
  } else if (p.kind == "hartmann6") {
    p.objective = std::make_shared<Hartmann6>();
    p.space = ActionSpace::box(std::vector<double>(6, 0.0), std::vector<double>(6, 1.0));
  } else if (p.kind == "synthetic_pbm") {
    const auto noise = s.get<double>("noise_frac", 0.01);
    if (noise < 0) throw ConfigError("problem.noise_frac must be >= 0");
    auto syn = gen_synthetic_pbm(rng, noise);
    p.objective = std::make_shared<PbmObjective>(syn.problem);
    p.space = syn.problem.space();
  } else if (p.kind == "pbm") {
    const auto path = s.require<std::string>("path");
    PbmProblem prob;
    try {
      prob = load_pbm(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    p.objective = std::make_shared<PbmObjective>(prob);
    p.space = prob.space();
  } else if (p.kind == "discrete_random_linear") {
    const auto count = s.require<std::size_t>("points");
    const auto d = s.require<std::size_t>("d");
    if (d < 1) throw ConfigError("problem.d must be >= 1");
    auto obj = gen_random_linear(d, rng);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> data(count * d);
    for (auto& v : data) v = unif(rng);
    p.objective = std::make_shared<RandomLinear>(std::move(obj));
    p.space = ActionSpace::discrete(numbered_ids(count), PointSet(d, std::move(data)));
  } else if (p.kind == "subprocess") {
    SubprocessObjectiveSpec sp;
    sp.command = s.require<std::string>("command");
    sp.error_value = s.get<double>("error_value", 0.0);
    sp.timeout_seconds = s.get<double>("timeout_s", 600.0);
    if (s.has("points_path")) {
      std::size_t dim = 0;
      auto data = read_points_file(s.require<std::string>("points_path"), dim);
      sp.dimension = dim;
      PointSet pts(dim, std::move(data));
      p.space = ActionSpace::discrete(numbered_ids(pts.size()), std::move(pts));
    } else {
      sp.lo = s.require<std::vector<double>>("lo");
      sp.hi = s.require<std::vector<double>>("hi");
      sp.dimension = sp.lo.size();
      p.space = ActionSpace::box(sp.lo, sp.hi);
    }
    p.objective = std::make_shared<SubprocessObjective>(std::move(sp));
  } else {
    throw ConfigError("unknown problem kind '" + p.kind + "'");
  }
  s.finish();
  return p;
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  Section s(j, "config");
  cfg.problem = s.require<json>("problem");
  const auto& methods = s.raw("methods");
  if (!methods.is_array() || methods.empty()) throw ConfigError("config: 'methods' must be a nonempty list");
  std::set<std::string> names;
  for (const auto& m : methods) {
    auto spec = parse_method(m);
    if (spec.name.empty() || spec.name.find_first_of(",/\\\n") != std::string::npos) {
      throw ConfigError("method name '" + spec.name + "' is not usable as a directory/CSV label");
    }
    if (!names.insert(spec.name).second) throw ConfigError("duplicate method name '" + spec.name + "'");
    cfg.methods.push_back(spec);
  }

  auto& opt = cfg.optimizer;
  opt.T = s.get<int>("T", 10);
  opt.n = s.get<int>("n", 100);
  opt.eta = s.get<double>("eta", 0.5);
  opt.threshold = parse_threshold(s.get<std::string>("threshold_policy", "latest-batch"));
  opt.log_cuts = s.get<bool>("log_cuts", false);
  cfg.replicates = s.get<int>("replicates", 15);
  cfg.base_seed = s.get<std::uint64_t>("base_seed", 0);
  cfg.output_dir = s.get<std::string>("output_dir", "results");

  if (s.has("tree")) {
    Section t(s.raw("tree"), "tree");
    auto& c = opt.classifier.tree;
    c.n_trees = t.get<int>("n_trees", c.n_trees);
    c.max_depth = t.get<int>("max_depth", c.max_depth);
    c.min_leaf = t.get<int>("min_leaf", c.min_leaf);
    c.feature_fraction = t.get<double>("feature_fraction", c.feature_fraction);
    c.bootstrap_rows = t.get<bool>("bootstrap_rows", c.bootstrap_rows);
    c.consensus_tau = t.get<double>("consensus_tau", c.consensus_tau);
    t.finish();
  }
  if (s.has("bootstrap")) {
    Section b(s.raw("bootstrap"), "bootstrap");
    auto& c = opt.classifier.bootstrap;
    c.B = b.get<int>("B", c.B);
    if (b.has("delta")) c.B = bootstrap_count_for(b.require<double>("delta"));
    c.sigma = b.get<double>("sigma", c.sigma);
    c.ridge = b.get<double>("ridge", c.ridge);
    c.tol = b.get<double>("tol", c.tol);
    c.max_iter = b.get<int>("max_iter", c.max_iter);
    b.finish();
  }
  if (s.has("sampler")) {
    Section sm(s.raw("sampler"), "sampler");
    auto& c = opt.sampler;
    const auto weighting = sm.get<std::string>("weighting", c.weighting == Weighting::importance ? "importance" : "target");
    if (weighting == "importance") {
      c.weighting = Weighting::importance;
    } else if (weighting == "target") {
      c.weighting = Weighting::target;
    } else {
      throw ConfigError("sampler: weighting must be 'importance' or 'target'");
    }
    c.bandwidth_fraction = sm.get<double>("bandwidth_fraction", c.bandwidth_fraction);
    c.shrink_coverage = sm.get<double>("shrink_coverage", c.shrink_coverage);
    c.oversample = sm.get<int>("oversample", c.oversample);
    c.min_ess_fraction = sm.get<double>("min_ess_fraction", c.min_ess_fraction);
    sm.finish();
  }
  s.finish();

  if (cfg.replicates < 1) throw ConfigError("config: replicates must be >= 1");
  opt.validate();
  make_problem(cfg.problem);  // surface problem errors before any run starts
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(j);
}

RunTrace run_method(const Problem& problem, const MethodSpec& method, const ExperimentConfig& cfg,
                    std::uint64_t replicate) {
  const SeedPolicy seed{cfg.base_seed, replicate};
  const auto& obj = *problem.objective;
  const auto& space = *problem.space;
  RunTrace trace;
  OptimizerConfig opt = cfg.optimizer;
  auto classifier_kind = [](MethodKind k) {
    switch (k) {
      case MethodKind::classify_rf: return ClassifierKind::tree_ensemble;
      case MethodKind::classify_tuned: return ClassifierKind::bootstrap_linear;
      case MethodKind::css: return ClassifierKind::css_linear;
      case MethodKind::oracle: return ClassifierKind::oracle;
      default: throw ConfigError("not a classifier method");
    }
  };
  switch (method.kind) {
    case MethodKind::random:
      trace = run_random(obj, space, opt.n, opt.T, seed, method.name);
      break;
    case MethodKind::random2x:
      trace = run_random(obj, space, 2 * opt.n, opt.T, seed, method.name);
      break;
    case MethodKind::pairwise:
      opt.classifier.kind = classifier_kind(method.pairwise_base);
      opt.pairwise = PairwiseConfig{method.pairwise_c};
      trace = run_classify_opt(obj, space, opt, seed, method.name);
      break;
    default:
      opt.classifier.kind = classifier_kind(method.kind);
      trace = run_classify_opt(obj, space, opt, seed, method.name);
      break;
  }
  trace.config = cfg.raw;
  return trace;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

AggregateReport aggregate(const std::vector<std::string>& method_order,
                          const std::vector<std::vector<RunTrace>>& traces) {
  if (method_order.size() != traces.size()) throw std::invalid_argument("aggregate: shape mismatch");
  AggregateReport report;
  for (std::size_t m = 0; m < method_order.size(); ++m) {
    MethodReport mr;
    mr.name = method_order[m];
    std::map<int, std::vector<double>> per_round;
    std::vector<const RunTrace*> sorted;
    for (const auto& t : traces[m]) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
      return a->seed.replicate_index < b->seed.replicate_index;
    });
    for (const auto* t : sorted) {
      if (!t->error.empty()) {
        mr.failures.push_back("replicate " + std::to_string(t->seed.replicate_index) + ": " + t->error);
        continue;
      }
      ++mr.completed;
      const auto best = best_so_far(*t);
      for (std::size_t i = 0; i < best.size(); ++i) per_round[t->rounds[i].t].push_back(best[i]);
    }
    for (auto& [t, values] : per_round) {
      if (values.size() != mr.completed) {
        report.warnings.push_back(mr.name + ": round " + std::to_string(t) + " missing in some replicates");
      }
      mr.rounds.push_back(RoundStats{t, quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)});
    }
    if (!mr.failures.empty()) {
      report.warnings.push_back(mr.name + ": aggregate over " + std::to_string(mr.completed) +
                                " completed replicates (" + std::to_string(mr.failures.size()) + " failed)");
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

json to_json(const AggregateReport& report) {
  json methods = json::array();
  for (const auto& m : report.methods) {
    json rounds = json::array();
    for (const auto& r : m.rounds) {
      rounds.push_back({{"t", r.t}, {"median", r.median}, {"q25", r.q25}, {"q75", r.q75}});
    }
    methods.push_back({{"name", m.name}, {"completed", m.completed}, {"failures", m.failures}, {"rounds", rounds}});
  }
  return {{"methods", methods}, {"warnings", report.warnings}};
}

AggregateReport report_from_json(const json& j) {
  AggregateReport report;
  for (const auto& m : j.at("methods")) {
    MethodReport mr;
    mr.name = m.at("name").get<std::string>();
    mr.completed = m.at("completed").get<std::size_t>();
    mr.failures = m.at("failures").get<std::vector<std::string>>();
    for (const auto& r : m.at("rounds")) {
      mr.rounds.push_back(RoundStats{r.at("t").get<int>(), r.at("median").get<double>(),
                                     r.at("q25").get<double>(), r.at("q75").get<double>()});
    }
    report.methods.push_back(std::move(mr));
  }
  report.warnings = j.at("warnings").get<std::vector<std::string>>();
  return report;
}

std::string emit_plot_data(const AggregateReport& report) {
  if (report.methods.empty()) throw std::invalid_argument("emit_plot_data: empty report");
  std::string out = "method,round,median,q25,q75\n";
  char buf[160];
  for (const auto& m : report.methods) {
    for (const auto& r : m.rounds) {
      std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,%.17g\n", r.t, r.median, r.q25, r.q75);
      out += m.name;
      out += buf;
    }
  }
  return out;
}

std::vector<PlotRow> load_plot_data(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "method,round,median,q25,q75") {
    throw std::runtime_error("plot data: unexpected header");
  }
  std::vector<PlotRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell[5];
    for (auto& c : cell) {
      if (!std::getline(fields, c, ',')) throw std::runtime_error("plot data: short row '" + line + "'");
    }
    rows.push_back(PlotRow{cell[0], std::stoi(cell[1]), std::strtod(cell[2].c_str(), nullptr),
                           std::strtod(cell[3].c_str(), nullptr), std::strtod(cell[4].c_str(), nullptr)});
  }
  return rows;
}

unsigned worker_count() {
  if (const char* env = std::getenv("CUTPLANE_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::filesystem::path trace_path(const std::filesystem::path& dir, const std::string& method, std::size_t r) {
  return dir / "traces" / method / ("replicate_" + std::to_string(r) + ".jsonl");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned workers) {
  if (workers == 0) workers = worker_count();
  const Problem problem = make_problem(cfg.problem);
  ExperimentConfig local = cfg;
  // Parallelism lives at the replicate level when more than one worker runs.
  local.optimizer.exec = workers > 1 ? Exec::serial : Exec::omp;

  const std::size_t methods = cfg.methods.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  ExperimentResult result;
  result.traces.assign(methods, std::vector<RunTrace>(reps));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < methods * reps;) {
      const std::size_t m = job / reps, r = job % reps;
      RunTrace trace;
      try {
        trace = run_method(problem, cfg.methods[m], local, r);
      } catch (const std::exception& e) {
        trace = RunTrace{};
        trace.method = cfg.methods[m].name;
        trace.seed = SeedPolicy{cfg.base_seed, r};
        trace.config = cfg.raw;
        trace.error = e.what();
      }
      write_file(trace_path(cfg.output_dir, cfg.methods[m].name, r), trace_to_jsonl(trace));
      result.traces[m][r] = std::move(trace);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, methods * reps); ++w) pool.emplace_back(worker);
  }

  std::vector<std::string> names;
  for (const auto& m : cfg.methods) names.push_back(m.name);
  result.report = aggregate(names, result.traces);
  for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << '\n';
  write_file(cfg.output_dir / "config.json", cfg.raw.dump(2) + "\n");
  write_file(cfg.output_dir / "aggregate.json", to_json(result.report).dump(2) + "\n");
  write_file(cfg.output_dir / "aggregate.csv", emit_plot_data(result.report));
  return result;
}

AggregateReport aggregate_directory(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  const auto cfg_path = dir / "config.json";
  if (std::filesystem::exists(cfg_path)) {
    const auto cfg = parse_experiment_config(json::parse(read_file(cfg_path)));
    for (const auto& m : cfg.methods) names.push_back(m.name);
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(dir / "traces")) {
      if (entry.is_directory()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }
  std::vector<std::vector<RunTrace>> traces(names.size());
  for (std::size_t m = 0; m < names.size(); ++m) {
    const auto method_dir = dir / "traces" / names[m];
    if (!std::filesystem::exists(method_dir)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(method_dir)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) traces[m].push_back(trace_from_jsonl(read_file(f)));
  }
  return aggregate(names, traces);
}

}  // namespace cutplane
