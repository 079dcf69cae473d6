// Experiment runner: config parsing, replicate orchestration, aggregation
// into median/quartile reports, and on-disk trace/report formats.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cutplane/core.hpp"
#include "cutplane/objectives.hpp"
#include "cutplane/optimize.hpp"

namespace cutplane {

enum class MethodKind { classify_rf, classify_tuned, css, oracle, pairwise, random, random2x };

struct MethodSpec {
  std::string name;  // label used for trace directories and reports
  MethodKind kind = MethodKind::random;
  int pairwise_c = 10;
  MethodKind pairwise_base = MethodKind::classify_rf;
};

struct Problem {
  std::shared_ptr<const Objective> objective;
  std::optional<ActionSpace> space;
  std::string kind;
};

struct ExperimentConfig {
  nlohmann::json problem;  // validated by make_problem
  std::vector<MethodSpec> methods;
  OptimizerConfig optimizer;  // T, n, eta, classifier configs, sampler, threshold
  int replicates = 15;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "results";
  nlohmann::json raw;  // snapshot stored in every trace header
};

/// Strict parser: unknown keys and out-of-range values throw ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

Problem make_problem(const nlohmann::json& spec);

/// Runs one (method, replicate) pair.
RunTrace run_method(const Problem& problem, const MethodSpec& method, const ExperimentConfig& cfg,
                    std::uint64_t replicate);

struct RoundStats {
  int t = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct MethodReport {
  std::string name;
  std::size_t completed = 0;
  std::vector<std::string> failures;
  std::vector<RoundStats> rounds;
};

struct AggregateReport {
  std::vector<MethodReport> methods;
  std::vector<std::string> warnings;
};

/// Linear-interpolation quantile of a sorted-or-not sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Traces grouped per method, in method order. Failed traces (non-empty error) are skipped.
AggregateReport aggregate(const std::vector<std::string>& method_order,
                          const std::vector<std::vector<RunTrace>>& traces);

nlohmann::json to_json(const AggregateReport& report);
AggregateReport report_from_json(const nlohmann::json& j);

/// Columns method, round, median, q25, q75; one row per (method, round).
std::string emit_plot_data(const AggregateReport& report);

struct PlotRow {
  std::string method;
  int round = 0;
  double median = 0.0, q25 = 0.0, q75 = 0.0;
  bool operator==(const PlotRow&) const = default;
};
std::vector<PlotRow> load_plot_data(const std::string& csv);

/// Worker count from CUTPLANE_WORKERS, else available parallelism.
unsigned worker_count();

struct ExperimentResult {
  AggregateReport report;
  std::vector<std::vector<RunTrace>> traces;  // [method][replicate]
};

/// Writes traces/<method>/replicate_<r>.jsonl, config.json, aggregate.json and aggregate.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned workers = 0);

/// Recomputes the aggregate from the traces stored under `dir`.
AggregateReport aggregate_directory(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cutplane
