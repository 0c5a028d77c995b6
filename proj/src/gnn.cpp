#include "fare/gnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::FaultFree:
      return "fault_free";
    case Strategy::FaultUnaware:
      return "fault_unaware";
    case Strategy::NeuronReorder:
      return "neuron_reorder";
    case Strategy::ClipOnly:
      return "clip_only";
    case Strategy::Fare:
      return "fare";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (const auto s : kAllStrategies) {
    if (name == to_string(s)) return s;
  }
  if (name == "nr") return Strategy::NeuronReorder;
  throw ConfigError(fmt::format(
      "unknown strategy '{}' (fault_free, fault_unaware, neuron_reorder, clip_only, fare)", name));
}

const char* to_string(GnnKind k) { return k == GnnKind::Gcn ? "gcn" : "sage"; }

GnnKind parse_gnn_kind(const std::string& name) {
  if (name == "gcn") return GnnKind::Gcn;
  if (name == "sage" || name == "sage-mean" || name == "sage_mean") return GnnKind::SageMean;
  throw ConfigError(fmt::format("unknown model kind '{}' (gcn or sage)", name));
}

StrategyTraits traits(Strategy s) {
  switch (s) {
    case Strategy::FaultFree:
      return {false, false, false, false};
    case Strategy::FaultUnaware:
      return {true, false, false, false};
    case Strategy::NeuronReorder:
      return {true, false, false, true};
    case Strategy::ClipOnly:
      return {true, true, false, false};
    case Strategy::Fare:
      return {true, true, true, false};
  }
  return {};
}

const char* to_string(FaultTargets t) {
  switch (t) {
    case FaultTargets::Both:
      return "both";
    case FaultTargets::Weights:
      return "weights";
    case FaultTargets::Adjacency:
      return "adjacency";
  }
  return "?";
}

FaultTargets parse_fault_targets(const std::string& name) {
  if (name == "both") return FaultTargets::Both;
  if (name == "weights") return FaultTargets::Weights;
  if (name == "adjacency") return FaultTargets::Adjacency;
  throw ConfigError(fmt::format("unknown fault target '{}' (both, weights, adjacency)", name));
}

std::vector<std::size_t> layer_dims(const ModelSpec& spec, std::size_t features, int classes) {
  std::vector<std::size_t> dims{features};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(static_cast<std::size_t>(classes));
  for (const auto d : dims) {
    if (d == 0) throw ConfigError("layer widths must be positive");
  }
  return dims;
}

// ---------------------------------------------------------------------------

namespace {

VectorXd intended_degrees(const BinaryMatrix& a) {
  VectorXd deg(static_cast<Eigen::Index>(a.rows));
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::size_t d = 0;
    for (const auto v : a.row(r)) d += v;
    deg(static_cast<Eigen::Index>(r)) = static_cast<double>(std::max<std::size_t>(d, 1));
  }
  return deg;
}

std::pair<VectorXd, VectorXd> scales(const BinaryMatrix& intended, GnnKind kind) {
  const VectorXd deg = intended_degrees(intended);
  if (kind == GnnKind::Gcn) {
    const VectorXd s = deg.array().rsqrt();
    return {s, s};
  }
  return {VectorXd::Ones(deg.size()), deg.array().inverse()};
}

}  // namespace

MatrixXd aggregation_operator(const BinaryMatrix& intended, const BinaryMatrix& stored,
                              GnnKind kind) {
  if (intended.rows != stored.rows || intended.cols != stored.cols ||
      intended.rows != intended.cols) {
    throw DimensionError("intended and stored adjacency must be the same square shape");
  }
  const auto [in, out] = scales(intended, kind);
  const auto n = static_cast<Eigen::Index>(stored.rows);
  MatrixXd s(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      s(r, c) = stored(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  return out.asDiagonal() * s.transpose() * in.asDiagonal();
}

ForwardCache forward(const Aggregator& agg, const MatrixXd& features,
                     const std::vector<MatrixXd>& weights) {
  ForwardCache cache;
  MatrixXd h = features;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (h.cols() != weights[l].rows()) {
      throw DimensionError(fmt::format("layer {} expects {} inputs, got {}", l,
                                       weights[l].rows(), h.cols()));
    }
    cache.aggregated.push_back(agg.apply(h));
    cache.pre.push_back(cache.aggregated.back() * weights[l]);
    h = l + 1 < weights.size() ? MatrixXd(cache.pre.back().cwiseMax(0.0)) : cache.pre.back();
  }
  cache.logits = h;
  return cache;
}

double softmax_cross_entropy(const MatrixXd& logits, const std::vector<int>& labels,
                             const std::vector<bool>& mask, MatrixXd* grad) {
  const auto rows = logits.rows();
  if (static_cast<std::size_t>(rows) != labels.size() || labels.size() != mask.size()) {
    throw DimensionError("logits, labels and mask disagree on node count");
  }
  const auto count = std::count(mask.begin(), mask.end(), true);
  if (grad) *grad = MatrixXd::Zero(rows, logits.cols());
  if (count == 0) return 0.0;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const double mx = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(r)];
    loss += -(logits(r, y) - mx - std::log(z));
    if (grad) {
      grad->row(r) = e / z;
      (*grad)(r, y) -= 1.0;
      grad->row(r) /= static_cast<double>(count);
    }
  }
  return loss / static_cast<double>(count);
}

std::vector<MatrixXd> backward(const Aggregator& agg, const ForwardCache& cache,
                               const std::vector<MatrixXd>& weights, const MatrixXd& dlogits) {
  std::vector<MatrixXd> grads(weights.size());
  MatrixXd dz = dlogits;
  for (std::size_t l = weights.size(); l-- > 0;) {
    grads[l] = cache.aggregated[l].transpose() * dz;
    if (l == 0) break;
    const MatrixXd dh = agg.apply_transpose(dz * weights[l].transpose());
    dz = dh.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return grads;
}

std::vector<MatrixXd> glorot_init(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MatrixXd> weights;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    MatrixXd w(static_cast<Eigen::Index>(dims[l]), static_cast<Eigen::Index>(dims[l + 1]));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

// ---------------------------------------------------------------------------

CrossbarAggregator::CrossbarAggregator(const BinaryMatrix& intended, std::span<const Block> blocks,
                                       const BlockMapping& mapping, std::span<const FaultMap> pool,
                                       GnnKind kind)
    : nodes_(intended.rows), n_(blocks.empty() ? 1 : blocks.front().n), kind_(kind),
      stored_(intended.rows, intended.cols) {
  std::tie(scale_in_, scale_out_) = scales(intended, kind);
  std::map<int, const FaultMap*> by_id;
  for (const auto& f : pool) by_id[f.crossbar_id()] = &f;

  const auto n = static_cast<Eigen::Index>(n_);
  for (const auto& block : blocks) {
    Tile tile{block.tile_row, block.tile_col, {}, MatrixXd::Zero(n, n)};
    const auto placed = mapping.assignments.find(block.id);
    if (placed != mapping.assignments.end()) {
      const auto fit = by_id.find(placed->second.crossbar_id);
      if (fit == by_id.end()) {
        throw DimensionError(fmt::format("block {} mapped to unknown crossbar {}", block.id,
                                         placed->second.crossbar_id));
      }
      tile.permutation = placed->second.rows.permutation;
      Crossbar xbar(CrossbarMode::Adjacency, *fit->second);
      std::vector<std::uint8_t> data(n_ * n_, 0);
      for (std::size_t i = 0; i < n_; ++i) {
        std::copy_n(block.cells.begin() + static_cast<std::ptrdiff_t>(i * n_), n_,
                    data.begin() + static_cast<std::ptrdiff_t>(tile.permutation[i] * n_));
      }
      xbar.write(data);
      for (std::size_t r = 0; r < n_; ++r) {
        for (std::size_t c = 0; c < n_; ++c) {
          tile.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = xbar.cell(r, c);
        }
      }
      for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t gr = block.tile_row * n_ + i;
        if (gr >= nodes_) continue;
        for (std::size_t c = 0; c < n_; ++c) {
          const std::size_t gc = block.tile_col * n_ + c;
          if (gc < nodes_) stored_(gr, gc) = xbar.cell(tile.permutation[i], c);
        }
      }
    } else if (mapping.removed_blocks.count(block.id)) {
      for (std::size_t r = 0; r < n_; ++r) {
        for (std::size_t c = 0; c < n_; ++c) {
          tile.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = block.cells[r * n_ + c];
          const std::size_t gr = block.tile_row * n_ + r;
          const std::size_t gc = block.tile_col * n_ + c;
          if (gr < nodes_ && gc < nodes_) stored_(gr, gc) = block.cells[r * n_ + c];
        }
      }
    } else {
      throw DimensionError(fmt::format("block {} is neither mapped nor host-served", block.id));
    }
    tiles_.push_back(std::move(tile));
  }
}

namespace {

MatrixXd padded(const MatrixXd& m, Eigen::Index rows) {
  MatrixXd out = MatrixXd::Zero(rows, m.cols());
  out.topRows(m.rows()) = m;
  return out;
}

}  // namespace

MatrixXd CrossbarAggregator::apply(const MatrixXd& h) const {
  if (static_cast<std::size_t>(h.rows()) != nodes_) {
    throw DimensionError(fmt::format("aggregation expects {} rows, got {}", nodes_, h.rows()));
  }
  const auto n = static_cast<Eigen::Index>(n_);
  const auto tiles = static_cast<Eigen::Index>((nodes_ + n_ - 1) / n_);
  const MatrixXd in = padded(scale_in_.asDiagonal() * h, tiles * n);
  MatrixXd out = MatrixXd::Zero(tiles * n, h.cols());
  MatrixXd gathered(n, h.cols());
  for (const auto& t : tiles_) {
    const auto band = in.middleRows(static_cast<Eigen::Index>(t.tile_row) * n, n);
    if (t.permutation.empty()) {
      gathered = band;
    } else {
      // Crossbar row permutation[i] receives the input of block row i.
      for (Eigen::Index i = 0; i < n; ++i) gathered.row(t.permutation[i]) = band.row(i);
    }
    out.middleRows(static_cast<Eigen::Index>(t.tile_col) * n, n).noalias() +=
        t.cells.transpose() * gathered;
  }
  return scale_out_.asDiagonal() * out.topRows(static_cast<Eigen::Index>(nodes_));
}

MatrixXd CrossbarAggregator::apply_transpose(const MatrixXd& g) const {
  if (static_cast<std::size_t>(g.rows()) != nodes_) {
    throw DimensionError(fmt::format("aggregation expects {} rows, got {}", nodes_, g.rows()));
  }
  const auto n = static_cast<Eigen::Index>(n_);
  const auto tiles = static_cast<Eigen::Index>((nodes_ + n_ - 1) / n_);
  const MatrixXd in = padded(scale_out_.asDiagonal() * g, tiles * n);
  MatrixXd out = MatrixXd::Zero(tiles * n, g.cols());
  for (const auto& t : tiles_) {
    const MatrixXd phys = t.cells * in.middleRows(static_cast<Eigen::Index>(t.tile_col) * n, n);
    auto band = out.middleRows(static_cast<Eigen::Index>(t.tile_row) * n, n);
    if (t.permutation.empty()) {
      band += phys;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) band.row(i) += phys.row(t.permutation[i]);
    }
  }
  return scale_in_.asDiagonal() * out.topRows(static_cast<Eigen::Index>(nodes_));
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> reorder_neurons(const WeightArray& array,
                                           std::span<const double> weights,
                                           const FixedPointCodec& codec) {
  const std::size_t rows = array.rows();
  const std::size_t cols = array.cols();
  if (weights.size() != rows * cols) throw DimensionError("weight count mismatch");
  std::vector<SliceVector> slices(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) slices[i] = encode(weights[i], codec);

  auto mismatches = [&](std::size_t neuron, std::size_t slot) {
    std::int64_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (int k = 0; k < FixedPointCodec::kSlices; ++k) {
        const CellFault f = array.fault_at(r, slot, k);
        if (f != CellFault::None &&
            stuck_value(f, CrossbarMode::Weight) != slices[r * cols + neuron][k]) {
          ++count;
        }
      }
    }
    return count;
  };

  std::vector<std::uint32_t> placement(cols, 0);
  std::vector<bool> placed(cols, false);
  for (std::size_t slot = 0; slot < cols; ++slot) {
    std::size_t best = cols;
    std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
    for (std::size_t j = 0; j < cols; ++j) {
      if (placed[j]) continue;
      const std::int64_t c = mismatches(j, slot);
      if (c < best_cost) {
        best = j;
        best_cost = c;
      }
    }
    placed[best] = true;
    placement[best] = static_cast<std::uint32_t>(slot);
  }
  return placement;
}

std::vector<std::uint32_t> reorder_node_rows(std::span<const Block* const> band,
                                             std::span<const FaultMap* const> faults) {
  if (band.size() != faults.size() || band.empty()) {
    throw DimensionError("band blocks and fault maps must pair up");
  }
  const std::size_t n = band.front()->n;
  std::vector<std::uint32_t> perm(n, 0);
  std::vector<bool> placed(n, false);
  for (std::size_t slot = 0; slot < n; ++slot) {
    std::size_t best = n;
    std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i]) continue;
      std::int64_t c = 0;
      for (std::size_t b = 0; b < band.size(); ++b) {
        c += mismatch_count(band[b]->row(i), faults[b]->row(slot));
      }
      if (c < best_cost) {
        best = i;
        best_cost = c;
      }
    }
    placed[best] = true;
    perm[best] = static_cast<std::uint32_t>(slot);
  }
  return perm;
}

// ---------------------------------------------------------------------------

namespace {

struct Batch {
  Subgraph sub;
  BinaryMatrix adjacency;
  std::vector<Block> blocks;
  MatrixXd features;
  std::vector<int> labels;
  std::vector<bool> train_mask;
  BlockMapping mapping;
};

std::vector<double> to_row_major(const MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMajor>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const RowMajor>(v.data(), rows, cols);
}

bool all_finite(const std::vector<MatrixXd>& ms) {
  return std::all_of(ms.begin(), ms.end(), [](const MatrixXd& m) { return m.allFinite(); });
}

// NR for aggregation: one node-row order per row band, shared by every block in it.
void reorder_bands(Batch& batch, std::span<const FaultMap> pool) {
  std::map<int, const FaultMap*> by_id;
  for (const auto& f : pool) by_id[f.crossbar_id()] = &f;
  std::map<std::size_t, std::vector<const Block*>> bands;
  for (const auto& b : batch.blocks) bands[b.tile_row].push_back(&b);
  for (const auto& [row, blocks] : bands) {
    std::vector<const FaultMap*> faults;
    for (const auto* b : blocks) faults.push_back(by_id.at(batch.mapping.assignments.at(b->id).crossbar_id));
    const auto perm = reorder_node_rows(blocks, faults);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      batch.mapping.assignments[blocks[i]->id].rows = evaluate_rows(*blocks[i], *faults[i], perm);
    }
  }
}

void count_faults(std::span<const FaultMap> maps, std::size_t& sa0, std::size_t& sa1) {
  for (const auto& m : maps) {
    sa0 += m.sa0_count();
    sa1 += m.sa1_count();
  }
}

}  // namespace

TrainResult train(const Graph& graph, const TrainOptions& opt) {
  graph.validate();
  opt.hardware.codec.validate();
  if (opt.model.epochs < 1) throw ConfigError("model.epochs must be at least 1");
  if (!(opt.model.learning_rate > 0.0)) throw ConfigError("model.learning_rate must be positive");
  if (!(opt.hardware.spare_factor >= 1.0)) throw ConfigError("crossbar.spare_factor must be >= 1");
  const StrategyTraits tr = traits(opt.strategy);
  const FixedPointCodec& codec = opt.hardware.codec;
  const std::size_t n = opt.hardware.adjacency_n;
  const auto dims = layer_dims(opt.model, static_cast<std::size_t>(graph.features.cols()),
                               graph.num_classes);

  TrainResult result;
  std::vector<Batch> batches;
  std::size_t max_blocks = 0;
  for (auto& sub : partition(graph, opt.partitions)) {
    Batch b;
    b.adjacency = sub.adjacency_with_self_loops();
    b.blocks = block_decompose(b.adjacency, n);
    b.features.resize(static_cast<Eigen::Index>(sub.nodes.size()), graph.features.cols());
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
      b.features.row(static_cast<Eigen::Index>(i)) = graph.features.row(sub.nodes[i]);
      b.labels.push_back(graph.labels[sub.nodes[i]]);
      b.train_mask.push_back(graph.split[sub.nodes[i]] == Split::Train);
    }
    b.sub = std::move(sub);
    max_blocks = std::max(max_blocks, b.blocks.size());
    batches.push_back(std::move(b));
  }
  result.batches = batches.size();

  // Crossbar pools. Fault maps depend only on the seed and pool shapes, so
  // every strategy sees the same hardware for a given seed.
  const auto pool_size = static_cast<std::size_t>(
      std::ceil(opt.hardware.spare_factor * static_cast<double>(max_blocks)));
  FaultModel model{opt.fault_density, opt.ratio, derive_seed(opt.seed, 0xFA17)};
  model.validate();
  FaultModel adj_model = model;
  FaultModel weight_model = model;
  if (!tr.faults || opt.targets == FaultTargets::Weights) adj_model.density = 0.0;
  if (!tr.faults || opt.targets == FaultTargets::Adjacency) weight_model.density = 0.0;

  std::vector<FaultMap> adj_pool = inject(adj_model, pool_size, n, 0);
  std::vector<WeightArray> arrays;
  int next_id = static_cast<int>(pool_size);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t count = WeightArray::row_tiles(dims[l], opt.hardware.weight_n) *
                              WeightArray::col_tiles(dims[l + 1], opt.hardware.weight_n);
    arrays.emplace_back(dims[l], dims[l + 1], opt.hardware.weight_n,
                        inject(weight_model, count, opt.hardware.weight_n, next_id));
    next_id += static_cast<int>(count);
    result.weight_crossbars += count;
  }
  result.adjacency_crossbars = pool_size;

  const auto started = std::chrono::steady_clock::now();
  for (auto& b : batches) {
    if (tr.fault_aware_mapping) {
      b.mapping = map_fault_aware(b.blocks, adj_pool, opt.hardware.solver);
      result.removed_blocks += b.mapping.removed_blocks.size();
    } else {
      b.mapping = map_row_major(b.blocks, adj_pool);
      if (tr.neuron_reorder) reorder_bands(b, adj_pool);
    }
  }
  result.preprocess_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::vector<MatrixXd> master = glorot_init(dims, derive_seed(opt.seed, 0x1417));
  std::vector<MatrixXd> adam_m, adam_v;
  for (const auto& w : master) {
    adam_m.push_back(MatrixXd::Zero(w.rows(), w.cols()));
    adam_v.push_back(MatrixXd::Zero(w.rows(), w.cols()));
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long step = 0;

  auto effective_weights = [&]() {
    std::vector<MatrixXd> eff;
    for (std::size_t l = 0; l < arrays.size(); ++l) {
      const auto w = to_row_major(master[l]);
      if (tr.neuron_reorder) arrays[l].set_placement(reorder_neurons(arrays[l], w, codec));
      arrays[l].write(w, codec, tr.clip);
      eff.push_back(from_row_major(arrays[l].effective(codec, tr.clip), master[l].rows(),
                                   master[l].cols()));
    }
    return eff;
  };

  const bool growth = tr.faults && opt.post_deployment_density > 0.0;
  PostDeploymentSchedule schedule{opt.post_deployment_density, opt.model.epochs};
  Bist bist;

  for (int epoch = 0; epoch < opt.model.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    int loss_batches = 0;
    for (const auto& b : batches) {
      const CrossbarAggregator agg(b.adjacency, b.blocks, b.mapping, adj_pool, opt.model.kind);
      const auto eff = effective_weights();
      const ForwardCache cache = forward(agg, b.features, eff);
      MatrixXd dlogits;
      const double loss = softmax_cross_entropy(cache.logits, b.labels, b.train_mask, &dlogits);
      if (std::none_of(b.train_mask.begin(), b.train_mask.end(), [](bool m) { return m; })) continue;
      if (!std::isfinite(loss)) {
        result.diverged = true;
        continue;
      }
      loss_sum += loss;
      ++loss_batches;
      const auto grads = backward(agg, cache, eff, dlogits);
      if (!all_finite(grads)) {
        result.diverged = true;
        continue;
      }
      // Straight-through: gradients taken at the effective weights update the master copy.
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t l = 0; l < master.size(); ++l) {
        const MatrixXd g = grads[l] + opt.model.weight_decay * master[l];
        adam_m[l] = kBeta1 * adam_m[l] + (1.0 - kBeta1) * g;
        adam_v[l] = kBeta2 * adam_v[l] + (1.0 - kBeta2) * g.cwiseProduct(g);
        master[l].array() -= opt.model.learning_rate * (adam_m[l].array() / c1) /
                             ((adam_v[l].array() / c2).sqrt() + kEps);
      }
    }
    rec.loss = loss_batches ? loss_sum / loss_batches : 0.0;

    // Epoch end: post-deployment growth, BIST, row remapping.
    if (growth) {
      if (opt.targets != FaultTargets::Weights) {
        adj_pool = advance_epoch(adj_pool, schedule, model, epoch);
      }
      if (opt.targets != FaultTargets::Adjacency) {
        for (auto& a : arrays) {
          const auto grown = advance_epoch(a.fault_maps(), schedule, model, epoch);
          a.set_faults(grown);
        }
      }
    }
    if (tr.fault_aware_mapping || tr.neuron_reorder) adj_pool = bist.scan(adj_pool);
    for (auto& b : batches) {
      const BlockMapping stale = reevaluate(b.mapping, b.blocks, adj_pool);
      rec.stale_cost += stale.total_cost();
      if (tr.fault_aware_mapping) {
        b.mapping = growth ? remap_rows(b.mapping, b.blocks, adj_pool, opt.hardware.solver) : stale;
        if (growth) ++result.remaps;
      } else {
        b.mapping = stale;
        if (tr.neuron_reorder && growth) reorder_bands(b, adj_pool);
      }
      rec.mapping_cost += b.mapping.total_cost();
    }
    count_faults(adj_pool, rec.adjacency_sa0, rec.adjacency_sa1);
    for (const auto& a : arrays) count_faults(a.fault_maps(), rec.weight_sa0, rec.weight_sa1);

    // Evaluation on the current hardware state.
    std::size_t hits[4] = {0, 0, 0, 0};
    std::size_t totals[4] = {0, 0, 0, 0};
    const auto eff = effective_weights();
    for (const auto& b : batches) {
      const CrossbarAggregator agg(b.adjacency, b.blocks, b.mapping, adj_pool, opt.model.kind);
      const MatrixXd logits = forward(agg, b.features, eff).logits;
      for (std::size_t i = 0; i < b.sub.nodes.size(); ++i) {
        Eigen::Index pred = 0;
        const auto row = logits.row(static_cast<Eigen::Index>(i));
        if (row.allFinite()) row.maxCoeff(&pred);
        const auto s = static_cast<std::size_t>(graph.split[b.sub.nodes[i]]);
        ++totals[s];
        if (pred == b.labels[i]) ++hits[s];
      }
    }
    auto acc = [&](Split s) {
      const auto i = static_cast<std::size_t>(s);
      return totals[i] ? static_cast<double>(hits[i]) / static_cast<double>(totals[i]) : 0.0;
    };
    rec.train_accuracy = acc(Split::Train);
    rec.val_accuracy = acc(Split::Val);
    rec.test_accuracy = acc(Split::Test);
    result.epochs.push_back(rec);
  }
  result.bist_scans = bist.scans();
  result.final_test_accuracy = result.epochs.back().test_accuracy;
  return result;
}

}  // namespace fare
