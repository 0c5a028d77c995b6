#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fare/assignment.hpp"
#include "fare/crossbar.hpp"
#include "fare/faults.hpp"
#include "fare/fixedpoint.hpp"
#include "fare/graph.hpp"
#include "fare/mapper.hpp"

namespace fare {

enum class GnnKind { Gcn, SageMean };

enum class Strategy { FaultFree, FaultUnaware, NeuronReorder, ClipOnly, Fare };

inline constexpr Strategy kAllStrategies[] = {Strategy::FaultFree, Strategy::FaultUnaware,
                                              Strategy::NeuronReorder, Strategy::ClipOnly,
                                              Strategy::Fare};

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);
const char* to_string(GnnKind k);
GnnKind parse_gnn_kind(const std::string& name);

/// What a strategy switches on.
struct StrategyTraits {
  bool faults = true;
  bool clip = false;
  bool fault_aware_mapping = false;
  bool neuron_reorder = false;
};
StrategyTraits traits(Strategy s);

enum class FaultTargets { Both, Weights, Adjacency };
const char* to_string(FaultTargets t);
FaultTargets parse_fault_targets(const std::string& name);

struct ModelSpec {
  GnnKind kind = GnnKind::Gcn;
  std::vector<std::size_t> hidden{16};
  double learning_rate = 0.01;
  int epochs = 100;
  double weight_decay = 0.0;
};

/// Layer widths: feature_dim, hidden..., classes.
std::vector<std::size_t> layer_dims(const ModelSpec& spec, std::size_t features, int classes);

// ---------------------------------------------------------------------------
// Host float reference path.

/// Normalised aggregation operator over a stored (possibly faulty) A+I
/// matrix S. Degrees always come from the intended matrix.
/// GCN: D^-1/2 S^T D^-1/2; SAGE-mean: D^-1 S^T.
Eigen::MatrixXd aggregation_operator(const BinaryMatrix& intended, const BinaryMatrix& stored,
                                     GnnKind kind);

/// Aggregation phase as a linear map with its adjoint (for the backward pass).
class Aggregator {
 public:
  virtual ~Aggregator() = default;
  virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& h) const = 0;
  virtual Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& g) const = 0;
};

class DenseAggregator final : public Aggregator {
 public:
  explicit DenseAggregator(Eigen::MatrixXd op) : op_(std::move(op)) {}
  Eigen::MatrixXd apply(const Eigen::MatrixXd& h) const override { return op_ * h; }
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& g) const override {
    return op_.transpose() * g;
  }

 private:
  Eigen::MatrixXd op_;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> aggregated;  // input to each combination
  std::vector<Eigen::MatrixXd> pre;         // pre-activations
  Eigen::MatrixXd logits;
};

/// Aggregate-then-combine per layer, ReLU between layers.
ForwardCache forward(const Aggregator& agg, const Eigen::MatrixXd& features,
                     const std::vector<Eigen::MatrixXd>& weights);

/// Mean softmax cross-entropy over rows with mask set. Writes dL/dlogits
/// into `grad` when non-null. Returns 0 and a zero gradient for an empty mask.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                             const std::vector<bool>& mask, Eigen::MatrixXd* grad);

/// Gradients with respect to each weight matrix as used in the forward pass.
std::vector<Eigen::MatrixXd> backward(const Aggregator& agg, const ForwardCache& cache,
                                      const std::vector<Eigen::MatrixXd>& weights,
                                      const Eigen::MatrixXd& dlogits);

std::vector<Eigen::MatrixXd> glorot_init(const std::vector<std::size_t>& dims, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Simulated hardware path.

struct HardwareConfig {
  std::size_t adjacency_n = 16;
  std::size_t weight_n = 16;
  double spare_factor = 2.0;  // adjacency crossbars per block of the largest batch
  Solver solver = Solver::Exact;
  FixedPointCodec codec{};
};

/// Aggregation through adjacency crossbars: blocks written under their
/// placement, one MVM per block with the input gathered through the row
/// permutation, partial sums accumulated per output band. Pruned blocks are
/// served from fault-free host storage.
class CrossbarAggregator final : public Aggregator {
 public:
  CrossbarAggregator(const BinaryMatrix& intended, std::span<const Block> blocks,
                     const BlockMapping& mapping, std::span<const FaultMap> pool, GnnKind kind);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& h) const override;
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& g) const override;

  /// Stored A+I as the hardware holds it (unpadded).
  const BinaryMatrix& stored() const { return stored_; }

 private:
  struct Tile {
    std::size_t tile_row;
    std::size_t tile_col;
    std::vector<std::uint32_t> permutation;  // empty for host-served blocks
    Eigen::MatrixXd cells;                   // physical rows
  };

  std::size_t nodes_;
  std::size_t n_;
  GnnKind kind_;
  Eigen::VectorXd scale_in_;
  Eigen::VectorXd scale_out_;
  std::vector<Tile> tiles_;
  BinaryMatrix stored_;
};

/// Greedy NR placement of one layer's neurons (whole column groups of eight
/// slices) onto physical slots: slots in order, each taking the unplaced
/// neuron with the fewest mismatching stuck cells. Returns placement[j] = slot.
std::vector<std::uint32_t> reorder_neurons(const WeightArray& array,
                                           std::span<const double> weights,
                                           const FixedPointCodec& codec);

/// Greedy NR order for one row band of adjacency blocks: crossbar row slots
/// in order, each taking the unplaced node row with the fewest mismatches
/// summed across the band. Returns permutation[i] = crossbar row of node row i.
std::vector<std::uint32_t> reorder_node_rows(std::span<const Block* const> band,
                                             std::span<const FaultMap* const> faults);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::int64_t mapping_cost = 0;
  std::int64_t stale_cost = 0;
  std::size_t adjacency_sa0 = 0;
  std::size_t adjacency_sa1 = 0;
  std::size_t weight_sa0 = 0;
  std::size_t weight_sa1 = 0;
};

struct TrainOptions {
  ModelSpec model{};
  Strategy strategy = Strategy::Fare;
  HardwareConfig hardware{};
  double fault_density = 0.0;
  SaRatio ratio{};
  FaultTargets targets = FaultTargets::Both;
  double post_deployment_density = 0.0;  // added over all epochs
  std::size_t partitions = 4;
  std::uint64_t seed = 1;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double final_test_accuracy = 0.0;
  bool diverged = false;
  std::size_t batches = 0;
  std::size_t adjacency_crossbars = 0;
  std::size_t weight_crossbars = 0;
  std::size_t removed_blocks = 0;
  std::size_t bist_scans = 0;
  std::size_t remaps = 0;
  double preprocess_seconds = 0.0;  // wall clock, informational only
};

TrainResult train(const Graph& graph, const TrainOptions& options);

}  // namespace fare
