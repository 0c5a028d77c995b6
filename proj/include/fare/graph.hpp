#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fare/mapper.hpp"

namespace fare {

enum class Split : std::uint8_t { None = 0, Train = 1, Val = 2, Test = 3 };

/// Undirected node-classification graph. Edges are stored once with u < v.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<Split> split;

  std::vector<std::vector<std::uint32_t>> neighbors() const;
  /// Throws ConfigError on out-of-range endpoints, self edges, duplicate
  /// edges or shape mismatches.
  void validate() const;
};

/// Two-or-more-block stochastic block model with class-dependent Gaussian features.
struct SbmParams {
  std::size_t nodes = 300;
  int classes = 2;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t feature_dim = 16;
  double feature_signal = 1.0;
  double feature_noise = 1.0;
  double informative_fraction = 1.0;  // leading feature dims that carry class signal
  double train_fraction = 0.5;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
};

Graph make_sbm(const SbmParams& params);

/// Random train/val/test split; the rest is test.
void assign_splits(Graph& graph, double train_fraction, double val_fraction, std::uint64_t seed);

/// `u v` per line, 0-indexed; blank lines and `#` comments skipped.
/// Duplicates and self loops are dropped.
std::vector<std::pair<std::uint32_t, std::uint32_t>> read_edge_list(std::istream& in,
                                                                    std::size_t* num_nodes);
void write_edge_list(std::ostream& out, const Graph& graph);

/// Feature CSV: one row per node, comma-separated reals. Label CSV: one integer per line.
Eigen::MatrixXd read_features_csv(std::istream& in);
std::vector<int> read_labels_csv(std::istream& in);
void write_features_csv(std::ostream& out, const Eigen::MatrixXd& features);
void write_labels_csv(std::ostream& out, const std::vector<int>& labels);

/// Induced subgraph of one partition. `nodes` maps local to global ids.
struct Subgraph {
  std::vector<std::uint32_t> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // local ids, u < v

  /// A + I as a dense binary matrix over local ids.
  BinaryMatrix adjacency_with_self_loops() const;
};

/// Balanced greedy BFS partitioning. Part p receives floor(N/k) nodes plus
/// one when p < N mod k; each part grows breadth-first from the lowest-id
/// unassigned node, reseeding when its frontier runs dry. Cut edges are dropped.
std::vector<Subgraph> partition(const Graph& graph, std::size_t k);

/// Dense adjacency (no self loops) of an edge list.
BinaryMatrix adjacency_matrix(std::size_t num_nodes,
                              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                              bool self_loops);

}  // namespace fare
