#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/gnn.hpp"
#include "fare/perf.hpp"

namespace fare {

inline constexpr const char* kToolVersion = "0.1.0";

/// Environment variable that, when set, becomes the root for relative output dirs.
inline constexpr const char* kOutputRootEnv = "FARE_OUTPUT_ROOT";

struct DatasetSpec {
  enum class Kind { Sbm, Files } kind = Kind::Sbm;
  SbmParams sbm{};
  std::string edges;     // Files: edge list
  std::string features;  // Files: feature CSV
  std::string labels;    // Files: label CSV
  double train_fraction = 0.5;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset{};
  ModelSpec model{};
  std::vector<Strategy> strategies{Strategy::Fare};
  std::size_t partitions = 4;
  double fault_density = 0.05;
  SaRatio ratio{};
  FaultTargets targets = FaultTargets::Both;
  double post_deployment_density = 0.0;
  HardwareConfig hardware{};
  PipelineSpec pipeline{};
  double time_unit_seconds = 0.0;  // > 0: also cost measured mapping time in pipeline units
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs/default";

  void validate() const;
};

/// "9:1" style ratio.
SaRatio parse_ratio(const std::string& text);

/// Strict parse: unknown keys and wrong types throw ConfigError naming the
/// field path; syntax errors report line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

Graph build_dataset(const DatasetSpec& spec);
TrainOptions train_options(const ExperimentConfig& config, Strategy strategy, std::uint64_t seed);

/// Resolved output directory (honours the environment override).
std::filesystem::path output_path(const ExperimentConfig& config);

void write_epochs_csv(std::ostream& out, const TrainResult& result);
nlohmann::json seed_report(const ExperimentConfig& config, Strategy strategy, std::uint64_t seed,
                           const TrainResult& result);

struct RunSummary {
  std::filesystem::path directory;
  nlohmann::json report;  // top-level report.json contents
  std::size_t failures = 0;
  bool complete() const { return failures == 0; }
};

/// Trains every (strategy, seed) pair and writes
///   <dir>/<strategy>/seed_<s>/{epochs.csv,report.json}
///   <dir>/<strategy>/aggregate.json
///   <dir>/report.json   (config echo, perf table, aggregates, timestamp)
///   <dir>/timing.json   (wall-clock mapping time; the only other nondeterministic output)
/// A seed that throws is recorded as a failure and the rest still run.
RunSummary run(const ExperimentConfig& config);

/// Comparison table over run directories:
/// run,strategy,seeds,median_final_test_accuracy,min_final_test_accuracy,max_final_test_accuracy
void merge_reports(std::ostream& out, const std::vector<std::filesystem::path>& runs);

}  // namespace fare
