#include "fare/perf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

void PipelineSpec::validate() const {
  if (batches < 1) throw ConfigError("pipeline.batches must be at least 1");
  if (stages < 1) throw ConfigError("pipeline.stages must be at least 1");
  if (!(stage_delay > 0.0)) throw ConfigError("pipeline.stage_delay must be positive");
  if (epochs < 1) throw ConfigError("pipeline.epochs must be at least 1");
  if (!(preprocess_time >= 0.0)) throw ConfigError("pipeline.preprocess_time must be >= 0");
  if (!(bist_overhead_fraction >= 0.0)) {
    throw ConfigError("pipeline.bist_overhead_fraction must be >= 0");
  }
  if (!(nr_stall >= 0.0)) throw ConfigError("pipeline.nr_stall must be >= 0");
}

double epoch_time(const PipelineSpec& spec, Strategy strategy) {
  spec.validate();
  const double n = spec.batches;
  const double s = spec.stages;
  const double d = spec.stage_delay;
  switch (strategy) {
    case Strategy::FaultFree:
    case Strategy::FaultUnaware:
      return (n + s - 1.0) * d;
    case Strategy::ClipOnly:
      return (n + s) * d;
    case Strategy::Fare:
      return (n + s) * d * (1.0 + spec.bist_overhead_fraction);
    case Strategy::NeuronReorder:
      return (n + s - 1.0) * d + n * spec.nr_stall;
  }
  return 0.0;
}

double total_time(const PipelineSpec& spec, Strategy strategy) {
  const double t = spec.epochs * epoch_time(spec, strategy);
  return strategy == Strategy::Fare ? t + spec.preprocess_time : t;
}

std::vector<PerfRow> normalized_report(const PipelineSpec& spec,
                                       std::span<const Strategy> strategies) {
  std::vector<Strategy> order{Strategy::FaultFree};
  for (const auto s : strategies) {
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  }
  const double base = total_time(spec, Strategy::FaultFree);
  const double nr = total_time(spec, Strategy::NeuronReorder);
  std::vector<PerfRow> rows;
  for (const auto s : order) {
    const double total = total_time(spec, s);
    rows.push_back({s, epoch_time(spec, s), total, total / base, nr / total});
  }
  return rows;
}

void write_perf_csv(std::ostream& out, std::span<const PerfRow> rows) {
  out << "strategy,epoch_time,total_time,normalized,speedup_over_nr\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(r.strategy), r.epoch_time,
                       r.total_time, r.normalized, r.speedup_over_nr);
  }
}

nlohmann::json perf_json(const PipelineSpec& spec, std::span<const PerfRow> rows) {
  nlohmann::json j;
  j["spec"] = {{"batches", spec.batches},
               {"stages", spec.stages},
               {"stage_delay", spec.stage_delay},
               {"epochs", spec.epochs},
               {"preprocess_time", spec.preprocess_time},
               {"bist_overhead_fraction", spec.bist_overhead_fraction},
               {"nr_stall", spec.nr_stall}};
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"strategy", to_string(r.strategy)},
                         {"epoch_time", r.epoch_time},
                         {"total_time", r.total_time},
                         {"normalized", r.normalized},
                         {"speedup_over_nr", r.speedup_over_nr}});
  }
  const auto fare = std::find_if(rows.begin(), rows.end(),
                                 [](const PerfRow& r) { return r.strategy == Strategy::Fare; });
  if (fare != rows.end()) j["fare_vs_nr_speedup"] = fare->speedup_over_nr;
  return j;
}

}  // namespace fare
