// cutplane: run experiments, aggregate traces, check bounds, export plot data.
#include <CLI11.hpp>
#include <iostream>

#include "cutplane/experiment.hpp"
#include "cutplane/theory.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int cmd_run(const std::string& config_path, const std::string& out_override, unsigned workers) {
  auto cfg = cutplane::load_experiment_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const auto result = cutplane::run_experiment(cfg, workers);
  std::cout << cutplane::to_json(result.report).dump(2) << '\n';
  return 0;
}

int cmd_aggregate(const std::string& dir) {
  const auto report = cutplane::aggregate_directory(dir);
  cutplane::write_file(std::filesystem::path(dir) / "aggregate.json", cutplane::to_json(report).dump(2) + "\n");
  cutplane::write_file(std::filesystem::path(dir) / "aggregate.csv", cutplane::emit_plot_data(report));
  std::cout << cutplane::to_json(report).dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& trace_path, long long x_star_opt, bool fail_on_violation) {
  const auto trace = cutplane::trace_from_jsonl(cutplane::read_file(trace_path));
  std::size_t x_star;
  if (x_star_opt >= 0) {
    x_star = static_cast<std::size_t>(x_star_opt);
  } else if (trace.x_star) {
    x_star = *trace.x_star;
  } else {
    throw std::runtime_error("trace has no logged x_star; pass --x-star");
  }
  const auto report = cutplane::verify_thm1(trace, x_star);
  std::cout << cutplane::to_json(report).dump(2) << '\n';
  if (report.gamma_zero) std::cerr << "warning: a round had zero coverage; the bound is vacuous\n";
  return fail_on_violation && !report.verdict ? 1 : 0;
}

int cmd_plot(const std::string& report_path, const std::string& out) {
  const auto report =
      cutplane::report_from_json(nlohmann::json::parse(cutplane::read_file(report_path)));
  cutplane::write_file(out, cutplane::emit_plot_data(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box optimization by classification-based cutting planes"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned workers = 0;
  auto* run = app.add_subcommand("run", "Run every (method, replicate) pair of an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Override output_dir");
  run->add_option("--workers", workers, "Concurrent replicates (default: CUTPLANE_WORKERS or all cores)");

  std::string agg_dir;
  auto* agg = app.add_subcommand("aggregate", "Recompute aggregate.json/csv from stored traces");
  agg->add_option("dir", agg_dir, "Experiment output directory")->required();

  std::string trace_path;
  long long x_star = -1;
  bool strict = false;
  auto* val = app.add_subcommand("validate-theory", "Check the multiplicative-weights bound on a discrete trace");
  val->add_option("trace", trace_path, "Trace file (.jsonl) recorded with log_cuts")->required();
  val->add_option("--x-star", x_star, "Action index to check (default: logged minimizer)");
  val->add_flag("--fail-on-violation", strict, "Exit 1 when the verdict is false");

  std::string report_path, csv_out;
  auto* plot = app.add_subcommand("plot-data", "Convert aggregate.json to CSV");
  plot->add_option("report", report_path, "aggregate.json")->required();
  plot->add_option("--out", csv_out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, workers);
    if (*agg) return cmd_aggregate(agg_dir);
    if (*val) return cmd_validate(trace_path, x_star, strict);
    if (*plot) return cmd_plot(report_path, csv_out);
  } catch (const cutplane::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
