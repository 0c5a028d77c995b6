#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "fare/assignment.hpp"
#include "fare/crossbar.hpp"

namespace fare {

/// Dense row-major 0/1 matrix.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0) {}

  std::uint8_t& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const std::uint8_t> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// One n x n tile of an adjacency matrix. Tiles are numbered row-major.
struct Block {
  int id = 0;
  std::size_t n = 0;
  std::size_t tile_row = 0;
  std::size_t tile_col = 0;
  std::vector<std::uint8_t> cells;
  std::size_t ones = 0;

  std::span<const std::uint8_t> row(std::size_t r) const { return {cells.data() + r * n, n}; }
  double edge_density() const { return n ? static_cast<double>(ones) / static_cast<double>(n * n) : 0.0; }
};

/// Splits A into ceil(N/n)^2 tiles, zero-padding the last band.
std::vector<Block> block_decompose(const BinaryMatrix& a, std::size_t n);

/// SA0 cells under a one plus SA1 cells under a zero.
std::int64_t mismatch_count(std::span<const std::uint8_t> data_row,
                            std::span<const CellFault> fault_row);
std::int64_t mismatch_count(std::span<const std::uint8_t> data_row,
                            const std::set<std::size_t>& sa0_cols,
                            const std::set<std::size_t>& sa1_cols);

/// Row permutation of a block onto a crossbar: block row i is written to
/// crossbar row `permutation[i]`.
struct RowAssignment {
  std::vector<std::uint32_t> permutation;
  std::int64_t cost = 0;
  std::int64_t sa1_nonoverlap = 0;

  friend bool operator==(const RowAssignment&, const RowAssignment&) = default;
};

/// Cost and SA1 non-overlap of placing `block` with a given permutation.
RowAssignment evaluate_rows(const Block& block, const FaultMap& faults,
                            std::vector<std::uint32_t> permutation);

/// Row-to-row bipartite matching minimising mismatches.
RowAssignment row_match(const Block& block, const FaultMap& faults, Solver solver);

/// Every (block, crossbar) pair: optimal row assignment and its costs.
struct CostTables {
  std::size_t blocks = 0;
  std::size_t crossbars = 0;
  CostMatrix cost;
  CostMatrix sa1_nonoverlap;
  std::vector<RowAssignment> rows;  // blocks x crossbars, row-major

  const RowAssignment& at(std::size_t block, std::size_t xbar) const {
    return rows[block * crossbars + xbar];
  }
};

CostTables build_cost_tables(std::span<const Block> blocks, std::span<const FaultMap> faults,
                             Solver solver);

/// Surviving indices after SA1-aware pruning, in ascending order.
struct PruneResult {
  std::vector<std::size_t> blocks;
  std::vector<std::size_t> crossbars;
  std::vector<std::size_t> removed_blocks;
  std::vector<std::size_t> removed_crossbars;
};

/// Crossbar-order sweep: when even the best block leaves more uncoverable
/// SA1 cells than the sparsest surviving block has ones, drop the crossbar if
/// spares remain, otherwise drop that sparsest block.
PruneResult prune(std::span<const Block> blocks, const CostTables& tables);

struct Placement {
  int crossbar_id = 0;
  RowAssignment rows;
};

/// Block-to-crossbar assignment plus per-block row permutations.
struct BlockMapping {
  std::size_t n = 0;
  std::map<int, Placement> assignments;  // block id -> placement
  std::set<int> removed_blocks;          // served from fault-free host storage
  std::set<int> removed_crossbars;

  std::int64_t total_cost() const;
  std::int64_t total_sa1_nonoverlap() const;
};

/// Minimum-cost injective assignment over the surviving blocks and crossbars.
BlockMapping assign_blocks(std::span<const Block> blocks, std::span<const FaultMap> faults,
                           const CostTables& tables, const PruneResult& survivors, Solver solver);

/// Full fault-aware mapping: cost tables, pruning, assignment.
BlockMapping map_fault_aware(std::span<const Block> blocks, std::span<const FaultMap> faults,
                             Solver solver);

/// Fault-unaware baseline: block i on crossbar i, identity row order.
BlockMapping map_row_major(std::span<const Block> blocks, std::span<const FaultMap> faults);

/// Keeps the block-to-crossbar assignment and recomputes row permutations
/// against updated fault maps.
BlockMapping remap_rows(const BlockMapping& mapping, std::span<const Block> blocks,
                        std::span<const FaultMap> faults, Solver solver);

/// Same assignment and permutations, costs re-evaluated under new faults.
BlockMapping reevaluate(const BlockMapping& mapping, std::span<const Block> blocks,
                        std::span<const FaultMap> faults);

nlohmann::json to_json(const BlockMapping& mapping);

}  // namespace fare
