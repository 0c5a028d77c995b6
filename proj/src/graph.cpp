#include "fare/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fare/error.hpp"
#include "fare/faults.hpp"

namespace fare {

std::vector<std::vector<std::uint32_t>> Graph::neighbors() const {
  std::vector<std::vector<std::uint32_t>> adj(num_nodes);
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

void Graph::validate() const {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw ConfigError(fmt::format("edge ({}, {}) outside {} nodes", u, v, num_nodes));
    }
    if (u == v) throw ConfigError(fmt::format("self edge on node {}", u));
    if (u > v || !seen.insert({u, v}).second) {
      throw ConfigError(fmt::format("edge ({}, {}) duplicated or not normalised", u, v));
    }
  }
  if (static_cast<std::size_t>(features.rows()) != num_nodes) {
    throw ConfigError(fmt::format("feature rows {} != nodes {}", features.rows(), num_nodes));
  }
  if (labels.size() != num_nodes || split.size() != num_nodes) {
    throw ConfigError("labels/splits must have one entry per node");
  }
  for (const int l : labels) {
    if (l < 0 || l >= num_classes) throw ConfigError(fmt::format("label {} out of range", l));
  }
}

Graph make_sbm(const SbmParams& p) {
  if (p.nodes == 0 || p.classes < 2) throw ConfigError("SBM needs nodes > 0 and >= 2 classes");
  if (p.p_in < 0 || p.p_in > 1 || p.p_out < 0 || p.p_out > 1) {
    throw ConfigError("SBM edge probabilities must lie in [0, 1]");
  }
  Graph g;
  g.num_nodes = p.nodes;
  g.num_classes = p.classes;
  g.labels.resize(p.nodes);
  for (std::size_t i = 0; i < p.nodes; ++i) g.labels[i] = static_cast<int>(i % p.classes);

  std::mt19937_64 rng(derive_seed(p.seed, 0x5b3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t u = 0; u < p.nodes; ++u) {
    for (std::uint32_t v = u + 1; v < p.nodes; ++v) {
      const double prob = g.labels[u] == g.labels[v] ? p.p_in : p.p_out;
      if (unit(rng) < prob) g.edges.emplace_back(u, v);
    }
  }

  if (p.informative_fraction < 0.0 || p.informative_fraction > 1.0) {
    throw ConfigError("SBM informative_fraction must lie in [0, 1]");
  }
  // Class means are random sign patterns on the informative dims, zero elsewhere.
  const auto informative = static_cast<std::size_t>(
      std::lround(p.informative_fraction * static_cast<double>(p.feature_dim)));
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(p.classes, static_cast<Eigen::Index>(p.feature_dim));
  std::bernoulli_distribution coin(0.5);
  for (int c = 0; c < p.classes; ++c) {
    for (std::size_t f = 0; f < informative; ++f) {
      means(c, static_cast<Eigen::Index>(f)) = coin(rng) ? p.feature_signal : -p.feature_signal;
    }
  }
  std::normal_distribution<double> noise(0.0, p.feature_noise);
  g.features.resize(static_cast<Eigen::Index>(p.nodes), static_cast<Eigen::Index>(p.feature_dim));
  for (std::size_t i = 0; i < p.nodes; ++i) {
    for (std::size_t f = 0; f < p.feature_dim; ++f) {
      g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
          means(g.labels[i], static_cast<Eigen::Index>(f)) + noise(rng);
    }
  }
  assign_splits(g, p.train_fraction, p.val_fraction, derive_seed(p.seed, 0x5b4));
  return g;
}

void assign_splits(Graph& graph, double train_fraction, double val_fraction, std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::uint32_t> order(graph.num_nodes);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(graph.num_nodes));
  const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(graph.num_nodes));
  graph.split.assign(graph.num_nodes, Split::Test);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_train) {
      graph.split[order[i]] = Split::Train;
    } else if (i < n_train + n_val) {
      graph.split[order[i]] = Split::Val;
    }
  }
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> read_edge_list(std::istream& in,
                                                                    std::size_t* num_nodes) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> unique;
  std::size_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long u = 0, v = 0;
    if (!(ss >> u)) continue;
    std::string rest;
    if (!(ss >> v) || (ss >> rest) || u < 0 || v < 0) {
      throw ConfigError(fmt::format("edge list line {}: expected two non-negative ids", lineno));
    }
    any = true;
    max_id = std::max<std::size_t>(max_id, static_cast<std::size_t>(std::max(u, v)));
    if (u == v) continue;
    unique.insert({static_cast<std::uint32_t>(std::min(u, v)),
                   static_cast<std::uint32_t>(std::max(u, v))});
  }
  if (num_nodes) *num_nodes = any ? max_id + 1 : 0;
  return {unique.begin(), unique.end()};
}

void write_edge_list(std::ostream& out, const Graph& graph) {
  for (const auto& [u, v] : graph.edges) out << u << ' ' << v << '\n';
}

Eigen::MatrixXd read_features_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("feature csv line {}: bad value '{}'", lineno, field));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(fmt::format("feature csv line {}: ragged row", lineno));
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

std::vector<int> read_labels_csv(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("label csv line {}: bad label '{}'", lineno, line));
    }
  }
  return labels;
}

void write_features_csv(std::ostream& out, const Eigen::MatrixXd& features) {
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      if (c) out << ',';
      out << fmt::format("{:.17g}", features(r, c));
    }
    out << '\n';
  }
}

void write_labels_csv(std::ostream& out, const std::vector<int>& labels) {
  for (const int l : labels) out << l << '\n';
}

BinaryMatrix adjacency_matrix(std::size_t num_nodes,
                              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                              bool self_loops) {
  BinaryMatrix a(num_nodes, num_nodes);
  for (const auto& [u, v] : edges) {
    a(u, v) = 1;
    a(v, u) = 1;
  }
  if (self_loops) {
    for (std::size_t i = 0; i < num_nodes; ++i) a(i, i) = 1;
  }
  return a;
}

BinaryMatrix Subgraph::adjacency_with_self_loops() const {
  return adjacency_matrix(nodes.size(), edges, true);
}

std::vector<Subgraph> partition(const Graph& graph, std::size_t k) {
  if (k == 0) throw ConfigError("partition count must be positive");
  if (k > graph.num_nodes) {
    throw ConfigError(fmt::format("cannot split {} nodes into {} parts", graph.num_nodes, k));
  }
  const auto adj = graph.neighbors();
  constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> part_of(graph.num_nodes, kUnassigned);
  std::vector<Subgraph> parts(k);
  std::uint32_t next_seed = 0;

  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t target = graph.num_nodes / k + (p < graph.num_nodes % k ? 1 : 0);
    auto& nodes = parts[p].nodes;
    std::deque<std::uint32_t> frontier;
    std::vector<bool> queued(graph.num_nodes, false);
    while (nodes.size() < target) {
      if (frontier.empty()) {
        while (part_of[next_seed] != kUnassigned) ++next_seed;
        frontier.push_back(next_seed);
        queued[next_seed] = true;
      }
      const std::uint32_t u = frontier.front();
      frontier.pop_front();
      if (part_of[u] != kUnassigned) continue;
      part_of[u] = static_cast<std::uint32_t>(p);
      nodes.push_back(u);
      for (const auto v : adj[u]) {
        if (part_of[v] == kUnassigned && !queued[v]) {
          queued[v] = true;
          frontier.push_back(v);
        }
      }
    }
  }

  for (auto& part : parts) {
    std::vector<std::uint32_t> local(graph.num_nodes, kUnassigned);
    for (std::uint32_t i = 0; i < part.nodes.size(); ++i) local[part.nodes[i]] = i;
    for (const auto& [u, v] : graph.edges) {
      if (local[u] == kUnassigned || local[v] == kUnassigned) continue;
      part.edges.emplace_back(std::min(local[u], local[v]), std::max(local[u], local[v]));
    }
    std::sort(part.edges.begin(), part.edges.end());
  }
  return parts;
}

}  // namespace fare
