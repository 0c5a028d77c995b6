// fare command line: inject / map / train / perf / report.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fare/fare.h"

namespace {

constexpr int kUsageExit = 64;

int report_failure(fare_status status) {
  std::cerr << fare_last_error_json() << "\n";
  return static_cast<int>(status);
}

// Writes to a file, or stdout when path is empty or "-".
bool emit(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return true;
  }
  std::ofstream out(path);
  out << text;
  if (!out) {
    std::cerr << "{\"status\":\"io_error\",\"message\":\"cannot write " << path << "\"}\n";
    return false;
  }
  return true;
}

bool parse_ratio(const std::string& text, double& sa0, double& sa1) {
  char tail = 0;
  return std::sscanf(text.c_str(), "%lf:%lf%c", &sa0, &sa1, &tail) == 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stuck-at fault crossbar simulator and fault-aware GNN mapping"};
  app.set_version_flag("--version", std::string(fare_version()));
  app.require_subcommand(1);

  // inject
  auto* inject = app.add_subcommand("inject", "Generate fault maps as CSV");
  double density = 0.05;
  std::string ratio = "9:1";
  std::size_t xbars = 1, n = 128;
  std::uint64_t seed = 1;
  std::string inject_out;
  inject->add_option("--density", density, "Fault density per cell")->capture_default_str();
  inject->add_option("--ratio", ratio, "SA0:SA1 ratio")->capture_default_str();
  inject->add_option("--xbars", xbars, "Number of crossbars")->required();
  inject->add_option("--n", n, "Crossbar size")->required();
  inject->add_option("--seed", seed, "Random seed")->capture_default_str();
  inject->add_option("-o,--out", inject_out, "Output CSV (default stdout)");

  // map
  auto* map = app.add_subcommand("map", "Map an adjacency matrix onto faulty crossbars");
  std::string adj_path, faults_path, solver_name = "exact", map_out, mode = "fare";
  map->add_option("--adj", adj_path, "Edge list, `u v` per line")->required()->check(CLI::ExistingFile);
  map->add_option("--faults", faults_path, "Fault CSV")->required()->check(CLI::ExistingFile);
  map->add_option("--solver", solver_name, "exact or suitor")->capture_default_str();
  map->add_option("--mode", mode, "fare or row_major")->check(CLI::IsMember({"fare", "row_major"}))
      ->capture_default_str();
  map->add_option("-o,--out", map_out, "Mapping JSON (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "Run an experiment from a config file");
  std::string config_path, output_dir;
  train->add_option("config", config_path, "Experiment config (JSON)")->required()
      ->check(CLI::ExistingFile);
  train->add_option("--output-dir", output_dir, "Override the config output_dir");

  // perf
  auto* perf = app.add_subcommand("perf", "Evaluate the pipeline timing model");
  fare_pipeline pipe = fare_pipeline_default();
  bool perf_json = false;
  std::string perf_out;
  perf->add_option("--batches", pipe.batches, "N")->capture_default_str();
  perf->add_option("--stages", pipe.stages, "S")->capture_default_str();
  perf->add_option("--delay", pipe.stage_delay, "Stage delay d")->capture_default_str();
  perf->add_option("--epochs", pipe.epochs)->capture_default_str();
  perf->add_option("--preprocess", pipe.preprocess_time, "One-off mapping time")->capture_default_str();
  perf->add_option("--bist", pipe.bist_overhead_fraction, "BIST overhead fraction")
      ->capture_default_str();
  perf->add_option("--nr-stall", pipe.nr_stall, "Per-batch NR stall r")->capture_default_str();
  perf->add_flag("--json", perf_json, "JSON instead of CSV");
  perf->add_option("-o,--out", perf_out, "Output file (default stdout)");

  // report
  auto* report = app.add_subcommand("report", "Compare run directories");
  std::vector<std::string> runs;
  std::string report_out;
  report->add_option("runs", runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("-o,--out", report_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  if (inject->parsed()) {
    double sa0 = 0, sa1 = 0;
    if (!parse_ratio(ratio, sa0, sa1)) {
      std::cerr << "{\"status\":\"usage\",\"message\":\"--ratio must look like 9:1\"}\n";
      return kUsageExit;
    }
    fare_faultset* set = nullptr;
    if (auto st = fare_faultset_inject(density, sa0, sa1, xbars, n, seed, &set); st != FARE_OK) {
      return report_failure(st);
    }
    char* csv = nullptr;
    const auto st = fare_faultset_to_csv(set, &csv);
    fare_faultset_free(set);
    if (st != FARE_OK) return report_failure(st);
    const bool ok = emit(inject_out, csv);
    fare_string_free(csv);
    return ok ? 0 : FARE_ERR_IO;
  }

  if (map->parsed()) {
    fare_solver solver;
    if (auto st = fare_solver_parse(solver_name.c_str(), &solver); st != FARE_OK) {
      return report_failure(st);
    }
    fare_adjacency* adj = nullptr;
    fare_faultset* set = nullptr;
    fare_mapping* m = nullptr;
    fare_status st = fare_adjacency_read(adj_path.c_str(), &adj);
    if (st == FARE_OK) st = fare_faultset_read_csv(faults_path.c_str(), &set);
    if (st == FARE_OK) st = fare_map(adj, set, solver, mode == "fare", &m);
    char* json = nullptr;
    if (st == FARE_OK) st = fare_mapping_to_json(m, &json);
    int code = 0;
    if (st != FARE_OK) {
      code = report_failure(st);
    } else {
      std::cerr << "blocks=" << fare_mapping_blocks(m) << " total_cost=" << fare_mapping_total_cost(m)
                << " sa1_nonoverlap=" << fare_mapping_sa1_nonoverlap(m)
                << " removed_blocks=" << fare_mapping_removed_blocks(m) << "\n";
      if (!emit(map_out, json)) code = FARE_ERR_IO;
    }
    fare_string_free(json);
    fare_mapping_free(m);
    fare_faultset_free(set);
    fare_adjacency_free(adj);
    return code;
  }

  if (train->parsed()) {
    fare_experiment* exp = nullptr;
    if (auto st = fare_experiment_load(config_path.c_str(), &exp); st != FARE_OK) {
      return report_failure(st);
    }
    fare_status st = FARE_OK;
    if (!output_dir.empty()) st = fare_experiment_set_output_dir(exp, output_dir.c_str());
    if (st == FARE_OK) st = fare_experiment_run(exp);
    int code = 0;
    if (st != FARE_OK) code = report_failure(st);
    if (st == FARE_OK || st == FARE_ERR_PARTIAL) {
      std::cout << fare_experiment_output_dir(exp) << "\n";
    }
    fare_experiment_free(exp);
    return code;
  }

  if (perf->parsed()) {
    char* text = nullptr;
    if (auto st = fare_perf_report(&pipe, perf_json ? FARE_FORMAT_JSON : FARE_FORMAT_CSV, &text);
        st != FARE_OK) {
      return report_failure(st);
    }
    const bool ok = emit(perf_out, text);
    fare_string_free(text);
    return ok ? 0 : FARE_ERR_IO;
  }

  if (report->parsed()) {
    std::vector<const char*> dirs;
    for (const auto& r : runs) dirs.push_back(r.c_str());
    char* csv = nullptr;
    if (auto st = fare_report_merge(dirs.data(), dirs.size(), &csv); st != FARE_OK) {
      return report_failure(st);
    }
    const bool ok = emit(report_out, csv);
    fare_string_free(csv);
    return ok ? 0 : FARE_ERR_IO;
  }
  return kUsageExit;
}
