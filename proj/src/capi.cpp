#include "fare/fare.h"

#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/error.hpp"
#include "fare/faults.hpp"
#include "fare/harness.hpp"
#include "fare/mapper.hpp"
#include "fare/perf.hpp"

struct fare_faultset {
  std::vector<fare::FaultMap> maps;
  std::size_t n = 0;
};

struct fare_adjacency {
  fare::BinaryMatrix matrix;  // A + I
};

struct fare_mapping {
  fare::BlockMapping mapping;
  std::size_t blocks = 0;
};

struct fare_experiment {
  fare::ExperimentConfig config;
  std::string output_dir;
  std::string report;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_json;
thread_local fare_status g_status = FARE_OK;

fare_status fail(fare_status status, const std::string& message) {
  g_status = status;
  g_error = message;
  g_error_json = nlohmann::json{{"status", fare_status_string(status)}, {"message", message}}.dump();
  return status;
}

void clear_error() {
  g_status = FARE_OK;
  g_error.clear();
  g_error_json.clear();
}

// Runs f, translating exceptions into status codes.
template <typename F>
fare_status guarded(F&& f) {
  clear_error();
  try {
    return f();
  } catch (const fare::ConfigError& e) {
    return fail(FARE_ERR_CONFIG, e.what());
  } catch (const fare::DimensionError& e) {
    return fail(FARE_ERR_DIMENSION, e.what());
  } catch (const fare::InfeasibleError& e) {
    return fail(FARE_ERR_INFEASIBLE, e.what());
  } catch (const fare::IoError& e) {
    return fail(FARE_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FARE_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(FARE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FARE_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fare::PipelineSpec to_spec(const fare_pipeline& p) {
  fare::PipelineSpec s;
  s.batches = p.batches;
  s.stages = p.stages;
  s.stage_delay = p.stage_delay;
  s.epochs = p.epochs;
  s.preprocess_time = p.preprocess_time;
  s.bist_overhead_fraction = p.bist_overhead_fraction;
  s.nr_stall = p.nr_stall;
  return s;
}

fare_strategy to_c(fare::Strategy s) { return static_cast<fare_strategy>(static_cast<int>(s)); }

std::optional<fare::Strategy> from_c(fare_strategy s) {
  if (s < FARE_STRATEGY_FAULT_FREE || s > FARE_STRATEGY_FARE) return std::nullopt;
  return static_cast<fare::Strategy>(static_cast<int>(s));
}

#define FARE_REQUIRE(cond, msg) \
  if (!(cond)) return fail(FARE_ERR_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* fare_version(void) { return fare::kToolVersion; }

const char* fare_status_string(fare_status status) {
  switch (status) {
    case FARE_OK: return "ok";
    case FARE_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FARE_ERR_CONFIG: return "config_error";
    case FARE_ERR_DIMENSION: return "dimension_error";
    case FARE_ERR_INFEASIBLE: return "infeasible";
    case FARE_ERR_IO: return "io_error";
    case FARE_ERR_PARTIAL: return "partial_failure";
    case FARE_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* fare_last_error(void) { return g_error.c_str(); }

const char* fare_last_error_json(void) {
  if (g_error_json.empty()) g_error_json = R"({"status":"ok","message":""})";
  return g_error_json.c_str();
}

void fare_string_free(char* s) { std::free(s); }

fare_status fare_strategy_parse(const char* name, fare_strategy* out) {
  return guarded([&] {
    FARE_REQUIRE(name && out, "null argument");
    *out = to_c(fare::parse_strategy(name));
    return FARE_OK;
  });
}

const char* fare_strategy_name(fare_strategy strategy) {
  const auto s = from_c(strategy);
  return s ? fare::to_string(*s) : "unknown";
}

fare_status fare_solver_parse(const char* name, fare_solver* out) {
  return guarded([&] {
    FARE_REQUIRE(name && out, "null argument");
    *out = fare::parse_solver(name) == fare::Solver::Exact ? FARE_SOLVER_EXACT : FARE_SOLVER_SUITOR;
    return FARE_OK;
  });
}

// ---- fault maps

fare_status fare_faultset_inject(double density, double sa0, double sa1, size_t crossbars, size_t n,
                                 uint64_t seed, fare_faultset** out) {
  return guarded([&] {
    FARE_REQUIRE(out, "null output handle");
    FARE_REQUIRE(n > 0, "crossbar size must be positive");
    fare::FaultModel model{density, {sa0, sa1}, seed};
    auto set = std::make_unique<fare_faultset>();
    set->maps = fare::inject(model, crossbars, n);
    set->n = n;
    *out = set.release();
    return FARE_OK;
  });
}

fare_status fare_faultset_read_csv(const char* path, fare_faultset** out) {
  return guarded([&] {
    FARE_REQUIRE(path && out, "null argument");
    std::ifstream in(path);
    if (!in) throw fare::IoError(std::string("cannot open ") + path);
    auto set = std::make_unique<fare_faultset>();
    set->maps = fare::read_fault_csv(in);
    set->n = set->maps.empty() ? 0 : set->maps.front().size();
    *out = set.release();
    return FARE_OK;
  });
}

fare_status fare_faultset_to_csv(const fare_faultset* set, char** out) {
  return guarded([&] {
    FARE_REQUIRE(set && out, "null argument");
    std::ostringstream ss;
    fare::write_fault_csv(ss, set->maps);
    *out = dup_string(ss.str());
    return FARE_OK;
  });
}

fare_status fare_faultset_write_csv(const fare_faultset* set, const char* path) {
  return guarded([&] {
    FARE_REQUIRE(set && path, "null argument");
    std::ofstream out(path);
    if (!out) throw fare::IoError(std::string("cannot write ") + path);
    fare::write_fault_csv(out, set->maps);
    if (!out) throw fare::IoError(std::string("write failed for ") + path);
    return FARE_OK;
  });
}

size_t fare_faultset_crossbars(const fare_faultset* set) { return set ? set->maps.size() : 0; }
size_t fare_faultset_n(const fare_faultset* set) { return set ? set->n : 0; }

size_t fare_faultset_sa0(const fare_faultset* set) {
  size_t total = 0;
  if (set) {
    for (const auto& m : set->maps) total += m.sa0_count();
  }
  return total;
}

size_t fare_faultset_sa1(const fare_faultset* set) {
  size_t total = 0;
  if (set) {
    for (const auto& m : set->maps) total += m.sa1_count();
  }
  return total;
}

void fare_faultset_free(fare_faultset* set) { delete set; }

// ---- adjacency

fare_status fare_adjacency_from_edges(size_t nodes, const uint32_t* edges, size_t count,
                                      fare_adjacency** out) {
  return guarded([&] {
    FARE_REQUIRE(out, "null output handle");
    FARE_REQUIRE(edges || count == 0, "null edge array");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> list;
    for (size_t i = 0; i < count; ++i) {
      const auto u = edges[2 * i], v = edges[2 * i + 1];
      if (u >= nodes || v >= nodes) throw fare::DimensionError("edge endpoint out of range");
      if (u != v) list.emplace_back(std::min(u, v), std::max(u, v));
    }
    auto adj = std::make_unique<fare_adjacency>();
    adj->matrix = fare::adjacency_matrix(nodes, list, true);
    *out = adj.release();
    return FARE_OK;
  });
}

fare_status fare_adjacency_read(const char* path, fare_adjacency** out) {
  return guarded([&] {
    FARE_REQUIRE(path && out, "null argument");
    std::ifstream in(path);
    if (!in) throw fare::IoError(std::string("cannot open ") + path);
    std::size_t nodes = 0;
    const auto edges = fare::read_edge_list(in, &nodes);
    auto adj = std::make_unique<fare_adjacency>();
    adj->matrix = fare::adjacency_matrix(nodes, edges, true);
    *out = adj.release();
    return FARE_OK;
  });
}

size_t fare_adjacency_nodes(const fare_adjacency* adj) { return adj ? adj->matrix.rows : 0; }

void fare_adjacency_free(fare_adjacency* adj) { delete adj; }

// ---- mapping

fare_status fare_map(const fare_adjacency* adj, const fare_faultset* faults, fare_solver solver,
                     int fault_aware, fare_mapping** out) {
  return guarded([&] {
    FARE_REQUIRE(adj && faults && out, "null argument");
    FARE_REQUIRE(faults->n > 0, "fault set has no crossbars");
    FARE_REQUIRE(solver == FARE_SOLVER_EXACT || solver == FARE_SOLVER_SUITOR, "unknown solver");
    const auto blocks = fare::block_decompose(adj->matrix, faults->n);
    auto m = std::make_unique<fare_mapping>();
    m->blocks = blocks.size();
    m->mapping = fault_aware
                     ? fare::map_fault_aware(blocks, faults->maps,
                                             solver == FARE_SOLVER_EXACT ? fare::Solver::Exact
                                                                         : fare::Solver::Suitor)
                     : fare::map_row_major(blocks, faults->maps);
    *out = m.release();
    return FARE_OK;
  });
}

int64_t fare_mapping_total_cost(const fare_mapping* m) { return m ? m->mapping.total_cost() : 0; }

int64_t fare_mapping_sa1_nonoverlap(const fare_mapping* m) {
  return m ? m->mapping.total_sa1_nonoverlap() : 0;
}

size_t fare_mapping_blocks(const fare_mapping* m) { return m ? m->blocks : 0; }

size_t fare_mapping_removed_blocks(const fare_mapping* m) {
  return m ? m->mapping.removed_blocks.size() : 0;
}

fare_status fare_mapping_to_json(const fare_mapping* m, char** out) {
  return guarded([&] {
    FARE_REQUIRE(m && out, "null argument");
    auto j = fare::to_json(m->mapping);
    j["blocks"] = m->blocks;
    *out = dup_string(j.dump(2) + "\n");
    return FARE_OK;
  });
}

void fare_mapping_free(fare_mapping* m) { delete m; }

// ---- experiments

fare_status fare_experiment_load(const char* config_path, fare_experiment** out) {
  return guarded([&] {
    FARE_REQUIRE(config_path && out, "null argument");
    auto exp = std::make_unique<fare_experiment>();
    exp->config = fare::load_config(config_path);
    exp->output_dir = fare::output_path(exp->config).string();
    *out = exp.release();
    return FARE_OK;
  });
}

fare_status fare_experiment_parse(const char* config_json, fare_experiment** out) {
  return guarded([&] {
    FARE_REQUIRE(config_json && out, "null argument");
    auto exp = std::make_unique<fare_experiment>();
    exp->config = fare::parse_config(config_json);
    exp->output_dir = fare::output_path(exp->config).string();
    *out = exp.release();
    return FARE_OK;
  });
}

fare_status fare_experiment_set_output_dir(fare_experiment* exp, const char* dir) {
  return guarded([&] {
    FARE_REQUIRE(exp && dir && *dir, "null or empty argument");
    exp->config.output_dir = dir;
    exp->output_dir = fare::output_path(exp->config).string();
    return FARE_OK;
  });
}

fare_status fare_experiment_run(fare_experiment* exp) {
  return guarded([&] {
    FARE_REQUIRE(exp, "null handle");
    const auto summary = fare::run(exp->config);
    exp->output_dir = summary.directory.string();
    exp->report = summary.report.dump(2);
    if (!summary.complete()) {
      return fail(FARE_ERR_PARTIAL, summary.report["failures"].dump());
    }
    return FARE_OK;
  });
}

const char* fare_experiment_output_dir(const fare_experiment* exp) {
  return exp ? exp->output_dir.c_str() : "";
}

const char* fare_experiment_report(const fare_experiment* exp) { return exp ? exp->report.c_str() : ""; }

void fare_experiment_free(fare_experiment* exp) { delete exp; }

// ---- timing

fare_pipeline fare_pipeline_default(void) {
  const fare::PipelineSpec s;
  return {s.batches, s.stages, s.stage_delay, s.epochs, s.preprocess_time, s.bist_overhead_fraction,
          s.nr_stall};
}

fare_status fare_perf_evaluate(const fare_pipeline* spec, fare_strategy strategy, double* epoch_time,
                               double* total_time) {
  return guarded([&] {
    FARE_REQUIRE(spec, "null pipeline");
    const auto s = from_c(strategy);
    FARE_REQUIRE(s, "unknown strategy");
    const auto p = to_spec(*spec);
    if (epoch_time) *epoch_time = fare::epoch_time(p, *s);
    if (total_time) *total_time = fare::total_time(p, *s);
    return FARE_OK;
  });
}

fare_status fare_perf_report(const fare_pipeline* spec, fare_format format, char** out) {
  return guarded([&] {
    FARE_REQUIRE(spec && out, "null argument");
    const auto p = to_spec(*spec);
    const auto rows = fare::normalized_report(p, fare::kAllStrategies);
    if (format == FARE_FORMAT_JSON) {
      *out = dup_string(fare::perf_json(p, rows).dump(2) + "\n");
    } else {
      std::ostringstream ss;
      fare::write_perf_csv(ss, rows);
      *out = dup_string(ss.str());
    }
    return FARE_OK;
  });
}

// ---- reports

fare_status fare_report_merge(const char* const* run_dirs, size_t count, char** out) {
  return guarded([&] {
    FARE_REQUIRE(out && (run_dirs || count == 0), "null argument");
    std::vector<std::filesystem::path> runs;
    for (size_t i = 0; i < count; ++i) {
      FARE_REQUIRE(run_dirs[i], "null run directory");
      runs.emplace_back(run_dirs[i]);
    }
    std::ostringstream ss;
    fare::merge_reports(ss, runs);
    *out = dup_string(ss.str());
    return FARE_OK;
  });
}

}  // extern "C"
