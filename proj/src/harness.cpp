#include "fare/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as typos.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where()));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(fmt::format("{}: expected a number", field(key)));
    return v->get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", field(key)));
    return v->get<std::int64_t>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(fmt::format("{}: must be non-negative", field(key)));
    return static_cast<std::size_t>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(fmt::format("{}: expected a string", field(key)));
    return v->get<std::string>();
  }

  Section child(const std::string& key) {
    static const json empty = json::object();
    const json* v = get(key);
    return Section(v ? *v : empty, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(fmt::format("{}: unknown key", field(it.key())));
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a parser for a named value and prefixes any ConfigError with the field path.
template <typename F>
auto with_field(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", field, e.what()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void parse_dataset(Section s, DatasetSpec& d) {
  const auto kind = s.text("kind", "sbm");
  if (kind == "sbm") {
    d.kind = DatasetSpec::Kind::Sbm;
    auto& p = d.sbm;
    p.nodes = s.count("nodes", p.nodes);
    p.classes = static_cast<int>(s.integer("classes", p.classes));
    p.p_in = s.number("p_in", p.p_in);
    p.p_out = s.number("p_out", p.p_out);
    p.feature_dim = s.count("feature_dim", p.feature_dim);
    p.feature_signal = s.number("feature_signal", p.feature_signal);
    p.feature_noise = s.number("feature_noise", p.feature_noise);
    p.informative_fraction = s.number("informative_fraction", p.informative_fraction);
    p.train_fraction = s.number("train_fraction", p.train_fraction);
    p.val_fraction = s.number("val_fraction", p.val_fraction);
    p.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(p.seed)));
  } else if (kind == "files") {
    d.kind = DatasetSpec::Kind::Files;
    d.edges = s.text("edges", "");
    d.features = s.text("features", "");
    d.labels = s.text("labels", "");
    d.train_fraction = s.number("train_fraction", d.train_fraction);
    d.val_fraction = s.number("val_fraction", d.val_fraction);
    d.split_seed = static_cast<std::uint64_t>(s.integer("split_seed", 0));
    for (const auto* key : {"edges", "features", "labels"}) {
      if (!s.has(key)) throw ConfigError(fmt::format("{}: required for kind \"files\"", s.field(key)));
    }
  } else {
    throw ConfigError(fmt::format("{}: unknown dataset kind \"{}\"", s.field("kind"), kind));
  }
  s.finish();
}

void parse_model(Section s, ModelSpec& m) {
  const auto kind = s.text("kind", to_string(m.kind));
  m.kind = with_field(s.field("kind"), [&] { return parse_gnn_kind(kind); });
  if (const json* h = s.get("hidden")) {
    if (!h->is_array()) throw ConfigError(fmt::format("{}: expected an array", s.field("hidden")));
    m.hidden.clear();
    for (const auto& w : *h) {
      if (!w.is_number_integer() || w.get<std::int64_t>() < 1) {
        throw ConfigError(fmt::format("{}: widths must be positive integers", s.field("hidden")));
      }
      m.hidden.push_back(w.get<std::size_t>());
    }
  }
  m.learning_rate = s.number("learning_rate", m.learning_rate);
  m.epochs = static_cast<int>(s.integer("epochs", m.epochs));
  m.weight_decay = s.number("weight_decay", m.weight_decay);
  s.finish();
}

void parse_strategies(const json& v, const std::string& field, std::vector<Strategy>& out) {
  out.clear();
  auto one = [&](const json& e) {
    if (!e.is_string()) throw ConfigError(fmt::format("{}: expected a strategy name", field));
    out.push_back(with_field(field, [&] { return parse_strategy(e.get<std::string>()); }));
  };
  if (v.is_array()) {
    for (const auto& e : v) one(e);
  } else {
    one(v);
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: at least one strategy required", field));
}

}  // namespace

SaRatio parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError(fmt::format("ratio \"{}\" is not of the form a:b", text));
  SaRatio r;
  try {
    std::size_t used = 0;
    r.sa0 = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing");
    const auto rest = text.substr(colon + 1);
    r.sa1 = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("ratio \"{}\" is not of the form a:b", text));
  }
  if (r.sa0 < 0 || r.sa1 < 0 || r.sa0 + r.sa1 <= 0) {
    throw ConfigError(fmt::format("ratio \"{}\" needs non-negative parts with a positive sum", text));
  }
  return r;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  if (strategies.empty()) throw ConfigError("strategy: at least one strategy required");
  if (partitions < 1) throw ConfigError("partitions: must be at least 1");
  if (model.epochs < 1) throw ConfigError("model.epochs: must be at least 1");
  if (!(model.learning_rate > 0)) throw ConfigError("model.learning_rate: must be positive");
  if (hardware.adjacency_n < 1) throw ConfigError("crossbar.n: must be at least 1");
  if (hardware.weight_n < 8 || hardware.weight_n % 8) {
    throw ConfigError("crossbar.weight_n: must be a positive multiple of 8");
  }
  if (!(hardware.spare_factor >= 1.0)) throw ConfigError("crossbar.spare_factor: must be >= 1");
  with_field("codec", [&] { hardware.codec.validate(); });
  with_field("faults", [&] { FaultModel{fault_density, ratio, 0}.validate(); });
  if (post_deployment_density < 0) throw ConfigError("post_deployment.density: must be >= 0");
  pipeline.validate();
  if (time_unit_seconds < 0) throw ConfigError("pipeline.time_unit_seconds: must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  if (dataset.kind == DatasetSpec::Kind::Files) {
    for (const auto& [key, p] : {std::pair{"edges", &dataset.edges}, {"features", &dataset.features},
                                 {"labels", &dataset.labels}}) {
      if (!fs::exists(*p)) throw ConfigError(fmt::format("dataset.{}: file not found: {}", key, *p));
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what());  // carries line and column
  }

  ExperimentConfig c;
  Section s(root, "");
  parse_dataset(s.child("dataset"), c.dataset);
  parse_model(s.child("model"), c.model);
  if (const json* st = s.get("strategy")) parse_strategies(*st, "strategy", c.strategies);
  c.partitions = s.count("partitions", c.partitions);

  {
    auto f = s.child("faults");
    c.fault_density = f.number("density", c.fault_density);
    if (const json* r = f.get("ratio")) {
      if (r->is_string()) {
        c.ratio = with_field(f.field("ratio"), [&] { return parse_ratio(r->get<std::string>()); });
      } else if (r->is_array() && r->size() == 2 && (*r)[0].is_number() && (*r)[1].is_number()) {
        c.ratio = {(*r)[0].get<double>(), (*r)[1].get<double>()};
      } else {
        throw ConfigError(fmt::format("{}: expected \"a:b\" or [a, b]", f.field("ratio")));
      }
    }
    const auto targets = f.text("targets", to_string(c.targets));
    c.targets = with_field(f.field("targets"), [&] { return parse_fault_targets(targets); });
    f.finish();
  }
  {
    auto p = s.child("post_deployment");
    c.post_deployment_density = p.number("density", c.post_deployment_density);
    p.finish();
  }
  {
    auto k = s.child("codec");
    c.hardware.codec.frac_bits = static_cast<int>(k.integer("frac_bits", c.hardware.codec.frac_bits));
    c.hardware.codec.clip_threshold = k.number("clip_threshold", c.hardware.codec.clip_threshold);
    k.finish();
  }
  {
    auto x = s.child("crossbar");
    c.hardware.adjacency_n = x.count("n", c.hardware.adjacency_n);
    c.hardware.weight_n = x.count("weight_n", c.hardware.weight_n);
    c.hardware.spare_factor = x.number("spare_factor", c.hardware.spare_factor);
    const auto solver = x.text("solver", to_string(c.hardware.solver));
    c.hardware.solver = with_field(x.field("solver"), [&] { return parse_solver(solver); });
    x.finish();
  }
  {
    // Batches and epochs follow the training setup unless given.
    auto p = s.child("pipeline");
    auto& ps = c.pipeline;
    ps.batches = static_cast<int>(p.integer("batches", static_cast<std::int64_t>(c.partitions)));
    ps.stages = static_cast<int>(p.integer("stages", ps.stages));
    ps.stage_delay = p.number("stage_delay", ps.stage_delay);
    ps.epochs = static_cast<int>(p.integer("epochs", c.model.epochs));
    ps.preprocess_time = p.number("preprocess_time", ps.preprocess_time);
    ps.bist_overhead_fraction = p.number("bist_overhead_fraction", ps.bist_overhead_fraction);
    ps.nr_stall = p.number("nr_stall", ps.nr_stall);
    c.time_unit_seconds = p.number("time_unit_seconds", c.time_unit_seconds);
    p.finish();
  }
  if (const json* seeds = s.get("seeds")) {
    if (!seeds->is_array()) throw ConfigError("seeds: expected an array");
    c.seeds.clear();
    for (const auto& v : *seeds) {
      if (!v.is_number_unsigned()) throw ConfigError("seeds: entries must be non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  c.output_dir = s.text("output_dir", c.output_dir);
  s.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  const auto text = read_file(path);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error&) {
    return parse_config(text);  // rethrows with line/column
  }
  // Dataset file paths are relative to the config file.
  const auto base = path.parent_path();
  if (root.is_object() && root.contains("dataset") && root["dataset"].is_object()) {
    auto& d = root["dataset"];
    for (const auto* key : {"edges", "features", "labels"}) {
      if (d.contains(key) && d[key].is_string()) {
        const fs::path p = d[key].get<std::string>();
        if (p.is_relative()) d[key] = (base / p).lexically_normal().string();
      }
    }
  }
  return parse_config(root.dump());
}

json to_json(const ExperimentConfig& c) {
  json d;
  if (c.dataset.kind == DatasetSpec::Kind::Sbm) {
    const auto& p = c.dataset.sbm;
    d = {{"kind", "sbm"},
         {"nodes", p.nodes},
         {"classes", p.classes},
         {"p_in", p.p_in},
         {"p_out", p.p_out},
         {"feature_dim", p.feature_dim},
         {"feature_signal", p.feature_signal},
         {"feature_noise", p.feature_noise},
         {"informative_fraction", p.informative_fraction},
         {"train_fraction", p.train_fraction},
         {"val_fraction", p.val_fraction},
         {"seed", p.seed}};
  } else {
    d = {{"kind", "files"},
         {"edges", c.dataset.edges},
         {"features", c.dataset.features},
         {"labels", c.dataset.labels},
         {"train_fraction", c.dataset.train_fraction},
         {"val_fraction", c.dataset.val_fraction},
         {"split_seed", c.dataset.split_seed}};
  }
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  return {
      {"dataset", d},
      {"model",
       {{"kind", to_string(c.model.kind)},
        {"hidden", c.model.hidden},
        {"learning_rate", c.model.learning_rate},
        {"epochs", c.model.epochs},
        {"weight_decay", c.model.weight_decay}}},
      {"strategy", strategies},
      {"partitions", c.partitions},
      {"faults",
       {{"density", c.fault_density},
        {"ratio", {c.ratio.sa0, c.ratio.sa1}},
        {"targets", to_string(c.targets)}}},
      {"post_deployment", {{"density", c.post_deployment_density}}},
      {"codec",
       {{"frac_bits", c.hardware.codec.frac_bits}, {"clip_threshold", c.hardware.codec.clip_threshold}}},
      {"crossbar",
       {{"n", c.hardware.adjacency_n},
        {"weight_n", c.hardware.weight_n},
        {"spare_factor", c.hardware.spare_factor},
        {"solver", to_string(c.hardware.solver)}}},
      {"pipeline",
       {{"batches", c.pipeline.batches},
        {"stages", c.pipeline.stages},
        {"stage_delay", c.pipeline.stage_delay},
        {"epochs", c.pipeline.epochs},
        {"preprocess_time", c.pipeline.preprocess_time},
        {"bist_overhead_fraction", c.pipeline.bist_overhead_fraction},
        {"nr_stall", c.pipeline.nr_stall},
        {"time_unit_seconds", c.time_unit_seconds}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
  };
}

Graph build_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::Sbm) return make_sbm(spec.sbm);

  Graph g;
  {
    std::ifstream in(spec.edges);
    if (!in) throw IoError(fmt::format("cannot open {}", spec.edges));
    g.edges = read_edge_list(in, &g.num_nodes);
  }
  {
    std::ifstream in(spec.features);
    if (!in) throw IoError(fmt::format("cannot open {}", spec.features));
    g.features = read_features_csv(in);
  }
  {
    std::ifstream in(spec.labels);
    if (!in) throw IoError(fmt::format("cannot open {}", spec.labels));
    g.labels = read_labels_csv(in);
  }
  // Isolated trailing nodes only show up in the feature file.
  g.num_nodes = std::max<std::size_t>(g.num_nodes, static_cast<std::size_t>(g.features.rows()));
  g.num_classes = g.labels.empty() ? 0 : *std::max_element(g.labels.begin(), g.labels.end()) + 1;
  assign_splits(g, spec.train_fraction, spec.val_fraction, spec.split_seed);
  g.validate();
  return g;
}

TrainOptions train_options(const ExperimentConfig& c, Strategy strategy, std::uint64_t seed) {
  TrainOptions o;
  o.model = c.model;
  o.strategy = strategy;
  o.hardware = c.hardware;
  o.fault_density = c.fault_density;
  o.ratio = c.ratio;
  o.targets = c.targets;
  o.post_deployment_density = c.post_deployment_density;
  o.partitions = c.partitions;
  o.seed = seed;
  return o;
}

fs::path output_path(const ExperimentConfig& c) {
  fs::path dir = c.output_dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && dir.is_relative()) {
    dir = fs::path(root) / dir;
  }
  return dir;
}

void write_epochs_csv(std::ostream& out, const TrainResult& r) {
  out << "epoch,loss,train_accuracy,val_accuracy,test_accuracy,mapping_cost,stale_cost,"
         "adjacency_sa0,adjacency_sa1,weight_sa0,weight_sa1\n";
  for (const auto& e : r.epochs) {
    out << fmt::format("{},{:.9g},{:.6f},{:.6f},{:.6f},{},{},{},{},{},{}\n", e.epoch, e.loss,
                       e.train_accuracy, e.val_accuracy, e.test_accuracy, e.mapping_cost, e.stale_cost,
                       e.adjacency_sa0, e.adjacency_sa1, e.weight_sa0, e.weight_sa1);
  }
}

json seed_report(const ExperimentConfig& c, Strategy strategy, std::uint64_t seed, const TrainResult& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_accuracy", e.val_accuracy},
                      {"test_accuracy", e.test_accuracy},
                      {"mapping_cost", e.mapping_cost},
                      {"stale_cost", e.stale_cost},
                      {"faults",
                       {{"adjacency_sa0", e.adjacency_sa0},
                        {"adjacency_sa1", e.adjacency_sa1},
                        {"weight_sa0", e.weight_sa0},
                        {"weight_sa1", e.weight_sa1}}}});
  }
  const bool complete = static_cast<int>(r.epochs.size()) == c.model.epochs;
  return {{"tool_version", kToolVersion},
          {"strategy", to_string(strategy)},
          {"seed", seed},
          {"final_test_accuracy", r.final_test_accuracy},
          {"diverged", r.diverged},
          {"early_abort", !complete},
          {"batches", r.batches},
          {"adjacency_crossbars", r.adjacency_crossbars},
          {"weight_crossbars", r.weight_crossbars},
          {"removed_blocks", r.removed_blocks},
          {"bist_scans", r.bist_scans},
          {"remaps", r.remaps},
          {"epochs", epochs},
          {"perf", perf_json(c.pipeline, normalized_report(c.pipeline, std::array{strategy}))},
          {"config", to_json(c)}};
}

RunSummary run(const ExperimentConfig& config) {
  config.validate();
  RunSummary summary;
  summary.directory = output_path(config);
  fs::create_directories(summary.directory);

  const Graph graph = build_dataset(config.dataset);

  std::vector<double> mapping_seconds;
  json aggregates = json::object();
  json failures = json::array();
  for (const auto strategy : config.strategies) {
    const std::string name = to_string(strategy);
    const auto sdir = summary.directory / name;
    fs::create_directories(sdir);
    std::vector<double> finals;
    json per_seed = json::array();
    std::size_t diverged = 0;
    for (const auto seed : config.seeds) {
      const auto dir = sdir / fmt::format("seed_{}", seed);
      try {
        fs::create_directories(dir);
        const auto result = train(graph, train_options(config, strategy, seed));
        std::ostringstream csv;
        write_epochs_csv(csv, result);
        write_file(dir / "epochs.csv", csv.str());
        write_file(dir / "report.json", seed_report(config, strategy, seed, result).dump(2) + "\n");
        finals.push_back(result.final_test_accuracy);
        diverged += result.diverged;
        if (strategy == Strategy::Fare) mapping_seconds.push_back(result.preprocess_seconds);
        per_seed.push_back({{"seed", seed}, {"final_test_accuracy", result.final_test_accuracy}});
      } catch (const std::exception& e) {
        ++summary.failures;
        json f = {{"strategy", name}, {"seed", seed}, {"error", e.what()}};
        failures.push_back(f);
        write_file(dir / "error.json", f.dump(2) + "\n");
      }
    }
    json agg = {{"strategy", name},
                {"seeds", per_seed},
                {"completed", finals.size()},
                {"diverged", diverged}};
    if (!finals.empty()) {
      agg["final_test_accuracy"] = {{"median", median(finals)},
                                    {"min", *std::min_element(finals.begin(), finals.end())},
                                    {"max", *std::max_element(finals.begin(), finals.end())}};
    }
    write_file(sdir / "aggregate.json", agg.dump(2) + "\n");
    aggregates[name] = agg;
  }

  const auto rows = normalized_report(config.pipeline, config.strategies);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  summary.report = {{"tool_version", kToolVersion},
                    {"timestamp", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now))},
                    {"complete", summary.failures == 0},
                    {"failures", failures},
                    {"aggregates", aggregates},
                    {"perf", perf_json(config.pipeline, rows)},
                    {"config", to_json(config)}};
  write_file(summary.directory / "report.json", summary.report.dump(2) + "\n");

  json timing = {{"fare_mapping_seconds", mapping_seconds}};
  if (!mapping_seconds.empty() && config.time_unit_seconds > 0) {
    auto measured = config.pipeline;
    measured.preprocess_time = median(mapping_seconds) / config.time_unit_seconds;
    timing["perf_measured"] = perf_json(measured, normalized_report(measured, config.strategies));
  }
  write_file(summary.directory / "timing.json", timing.dump(2) + "\n");
  return summary;
}

void merge_reports(std::ostream& out, const std::vector<fs::path>& runs) {
  if (runs.empty()) throw ConfigError("report: no run directories given");
  out << "run,strategy,seeds,median_final_test_accuracy,min_final_test_accuracy,"
         "max_final_test_accuracy\n";
  for (const auto& dir : runs) {
    json report;
    try {
      report = json::parse(read_file(dir / "report.json"));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}: malformed report.json ({})", dir.string(), e.what()));
    }
    if (!report.contains("aggregates") || !report["aggregates"].is_object()) {
      throw IoError(fmt::format("{}: report.json has no aggregates", dir.string()));
    }
    const auto run_name = dir.filename().empty() ? dir.parent_path().filename() : dir.filename();
    for (const auto& [name, agg] : report["aggregates"].items()) {
      if (!agg.contains("final_test_accuracy")) {
        out << fmt::format("{},{},0,,,\n", run_name.string(), name);
        continue;
      }
      const auto& a = agg["final_test_accuracy"];
      out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}\n", run_name.string(), name,
                         agg["completed"].get<std::size_t>(), a["median"].get<double>(),
                         a["min"].get<double>(), a["max"].get<double>());
    }
  }
}

}  // namespace fare
