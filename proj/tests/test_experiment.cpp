#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cutplane/experiment.hpp"

using namespace cutplane;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cutplane_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_config(const fs::path& out) {
  return json{{"problem", {{"kind", "random_linear"}, {"d", 3}, {"seed", 4}}},
              {"methods", {"random", "classify-rf"}},
              {"T", 3},
              {"n", 12},
              {"replicates", 3},
              {"base_seed", 10},
              {"tree", {{"n_trees", 10}}},
              {"output_dir", out.string()}};
}

std::string slurp(const fs::path& p) { return read_file(p); }

RunTrace fake_trace(const std::string& method, std::uint64_t r, std::vector<std::vector<double>> values) {
  RunTrace t;
  t.method = method;
  t.seed = {0, r};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    RoundRecord rec;
    rec.t = static_cast<int>(i);
    rec.values = values[i];
    for (double v : rec.values) best = std::min(best, v);
    rec.best_so_far = best;
    t.rounds.push_back(rec);
  }
  t.final_y = best;
  return t;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  const auto out = scratch("strict");
  CHECK_NOTHROW(parse_experiment_config(small_config(out)));
  auto bad = small_config(out);
  bad["colour"] = 1;
  CHECK_THROWS_WITH_AS(parse_experiment_config(bad), doctest::Contains("unknown key 'colour'"), ConfigError);
  bad = small_config(out);
  bad["replicates"] = 0;
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = small_config(out);
  bad["methods"] = json::array();
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = small_config(out);
  bad["methods"] = {"random", "random"};
  CHECK_THROWS_WITH(parse_experiment_config(bad), doctest::Contains("duplicate"));
  bad = small_config(out);
  bad["tree"]["depth"] = 3;
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = small_config(out);
  bad["problem"]["kind"] = "rosenbrock";
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = small_config(out);
  bad["sampler"] = {{"weighting", "exact"}};
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);

  auto pw = small_config(out);
  pw["methods"] = {json{{"method", "pairwise"}, {"c", 5}}};
  const auto cfg = parse_experiment_config(pw);
  CHECK(cfg.methods.at(0).name == "pairwise-c5");
  CHECK(cfg.methods.at(0).pairwise_c == 5);
}

TEST_CASE("quantile interpolation") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({7}, 0.75) == 7);
  CHECK_THROWS(quantile({}, 0.5));
}

TEST_CASE("a single replicate aggregates to its own best-so-far") {
  const auto r = aggregate({"m"}, {{fake_trace("m", 0, {{3, 2}, {5}, {1, 9}})}});
  REQUIRE(r.methods.size() == 1);
  const auto& rounds = r.methods[0].rounds;
  REQUIRE(rounds.size() == 3);
  const std::vector<double> expect{2, 2, 1};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rounds[i].median == expect[i]);
    CHECK(rounds[i].q25 == expect[i]);
    CHECK(rounds[i].q75 == expect[i]);
  }
  CHECK(r.warnings.empty());
}

TEST_CASE("aggregation does not depend on trace order and ignores failures with a warning") {
  std::vector<RunTrace> ts;
  for (std::uint64_t k = 0; k < 5; ++k) ts.push_back(fake_trace("m", k, {{double(k)}, {double(k) - 1}}));
  auto rev = ts;
  std::reverse(rev.begin(), rev.end());
  CHECK(to_json(aggregate({"m"}, {ts})) == to_json(aggregate({"m"}, {rev})));
  const auto r = aggregate({"m"}, {ts});
  CHECK(r.methods[0].rounds[1].median == 1.0);
  CHECK(r.methods[0].rounds[1].q25 == 0.0);

  ts[2].error = "round 1: classifier fit failed";
  ts[2].rounds.resize(1);
  const auto partial = aggregate({"m"}, {ts});
  CHECK(partial.methods[0].completed == 4);
  CHECK(partial.methods[0].failures.size() == 1);
  CHECK(!partial.warnings.empty());
}

TEST_CASE("constant objective aggregates to the constant") {
  std::vector<RunTrace> ts;
  for (std::uint64_t k = 0; k < 4; ++k) ts.push_back(fake_trace("c", k, {{1.5, 1.5}, {1.5}}));
  const auto report = aggregate({"c"}, {ts});
  for (const auto& s : report.methods[0].rounds) {
    CHECK(s.median == 1.5);
    CHECK(s.q25 == 1.5);
    CHECK(s.q75 == 1.5);
  }
}

TEST_CASE("plot data has one row per (method, round) and round-trips") {
  std::vector<std::vector<RunTrace>> all(2);
  for (std::uint64_t k = 0; k < 3; ++k) {
    std::vector<std::vector<double>> a(10), b(10);
    for (int t = 0; t < 10; ++t) {
      a[t] = {0.1 * t + k, 1.0 / 3.0};
      b[t] = {std::sqrt(2.0) * (t + 1) * (k + 1)};
    }
    all[0].push_back(fake_trace("a", k, a));
    all[1].push_back(fake_trace("b", k, b));
  }
  const auto report = aggregate({"a", "b"}, all);
  const auto csv = emit_plot_data(report);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
  CHECK(csv.rfind("method,round,median,q25,q75\n", 0) == 0);
  const auto rows = load_plot_data(csv);
  REQUIRE(rows.size() == 20);
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t t = 0; t < 10; ++t) {
      const auto& row = rows[m * 10 + t];
      const auto& s = report.methods[m].rounds[t];
      CHECK(row.method == report.methods[m].name);
      CHECK(row.median == s.median);
      CHECK(row.q25 == s.q25);
      CHECK(row.q75 == s.q75);
    }
  }
  CHECK(to_json(report_from_json(to_json(report))) == to_json(report));
}

TEST_CASE("experiment output layout, determinism and audit") {
  const auto out = scratch("layout");
  auto cfg = parse_experiment_config(small_config(out / "a"));
  const auto first = run_experiment(cfg, 2);
  for (const auto* m : {"random", "classify-rf"}) {
    for (int r = 0; r < 3; ++r) {
      CHECK(fs::exists(out / "a" / "traces" / m / ("replicate_" + std::to_string(r) + ".jsonl")));
    }
  }
  CHECK(fs::exists(out / "a" / "config.json"));
  CHECK(slurp(out / "a" / "aggregate.csv") == emit_plot_data(first.report));
  CHECK(to_json(aggregate_directory(out / "a")) == to_json(first.report));

  cfg.output_dir = out / "b";
  run_experiment(cfg, 1);
  for (const auto& e : fs::recursive_directory_iterator(out / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out / "a");
    if (rel == "config.json") continue;  // records its own output_dir
    CHECK_MESSAGE(slurp(e.path()) == slurp(out / "b" / rel), rel.string());
  }

  const auto trace = trace_from_jsonl(slurp(out / "a" / "traces" / "random" / "replicate_1.jsonl"));
  CHECK(trace.seed.base_seed == 10);
  CHECK(trace.seed.replicate_index == 1);
  CHECK(trace.rounds.size() == 3);
  CHECK(trace.evaluations() == 36);
}

TEST_CASE("fifteen replicates give fifteen traces") {
  const auto out = scratch("fifteen");
  auto j = small_config(out);
  j["methods"] = {"random"};
  j["replicates"] = 15;
  j["T"] = 1;
  const auto res = run_experiment(parse_experiment_config(j), 4);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out / "traces" / "random")) files += e.is_regular_file();
  CHECK(files == 15);
  CHECK(res.report.methods[0].completed == 15);
}

#ifdef CUTPLANE_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const int status = std::system((std::string(CUTPLANE_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("command-line exit codes") {
  const auto out = scratch("cli");
  auto j = small_config(out / "run");
  j["methods"] = {"random", json{{"method", "oracle"}, {"name", "oracle"}}};
  j["problem"] = {{"kind", "discrete_random_linear"}, {"points", 200}, {"d", 3}, {"seed", 1}};
  j["log_cuts"] = true;
  j["replicates"] = 2;
  write_file(out / "good.json", j.dump());
  auto bad = j;
  bad["bogus"] = true;
  write_file(out / "bad.json", bad.dump());

  CHECK(run_cli("run " + (out / "good.json").string()) == 0);
  CHECK(run_cli("run " + (out / "bad.json").string()) == 2);
  CHECK(run_cli("run " + (out / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("aggregate " + (out / "run").string()) == 0);
  CHECK(run_cli("plot-data " + (out / "run" / "aggregate.json").string() + " --out " + (out / "p.csv").string()) == 0);
  CHECK(slurp(out / "p.csv") == slurp(out / "run" / "aggregate.csv"));
  const auto trace = (out / "run" / "traces" / "oracle" / "replicate_0.jsonl").string();
  CHECK(run_cli("validate-theory " + trace + " --fail-on-violation") == 0);
  CHECK(run_cli("validate-theory " + (out / "run" / "traces" / "random" / "replicate_0.jsonl").string()) == 3);
}
#endif
