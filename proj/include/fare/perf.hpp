#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "fare/gnn.hpp"

namespace fare {

/// Pipelined training timing parameters, in abstract time units.
struct PipelineSpec {
  int batches = 50;             // N
  int stages = 4;               // S
  double stage_delay = 1.0;     // d
  int epochs = 1;
  double preprocess_time = 0.0; // one-off fault-aware mapping cost
  double bist_overhead_fraction = 0.0013;
  double nr_stall = 1.0;        // r, per-batch stall for neuron reordering

  void validate() const;
};

/// Time of one epoch:
///   fault_free, fault_unaware  (N + S - 1) d
///   clip_only                  (N + S) d           (extra clipping stage)
///   fare                       (N + S) d (1 + bist)
///   neuron_reorder             (N + S - 1) d + N r
double epoch_time(const PipelineSpec& spec, Strategy strategy);

/// epochs * epoch_time, plus the preprocessing time for fare. Row remapping
/// runs on the host concurrently with the device and adds nothing.
double total_time(const PipelineSpec& spec, Strategy strategy);

struct PerfRow {
  Strategy strategy;
  double epoch_time;
  double total_time;
  double normalized;       // relative to fault_free
  double speedup_over_nr;  // neuron_reorder total / this total
};

/// One row per strategy; fault_free is always included as the baseline.
std::vector<PerfRow> normalized_report(const PipelineSpec& spec, std::span<const Strategy> strategies);

void write_perf_csv(std::ostream& out, std::span<const PerfRow> rows);
nlohmann::json perf_json(const PipelineSpec& spec, std::span<const PerfRow> rows);

}  // namespace fare
