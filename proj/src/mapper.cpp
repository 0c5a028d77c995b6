#include "fare/mapper.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

std::vector<Block> block_decompose(const BinaryMatrix& a, std::size_t n) {
  if (n == 0) throw ConfigError("block size must be positive");
  if (a.rows != a.cols) throw DimensionError("adjacency matrix must be square");
  const std::size_t tiles = (a.rows + n - 1) / n;
  std::vector<Block> blocks;
  blocks.reserve(tiles * tiles);
  for (std::size_t tr = 0; tr < tiles; ++tr) {
    for (std::size_t tc = 0; tc < tiles; ++tc) {
      Block b;
      b.id = static_cast<int>(blocks.size());
      b.n = n;
      b.tile_row = tr;
      b.tile_col = tc;
      b.cells.assign(n * n, 0);
      for (std::size_t r = 0; r < n && tr * n + r < a.rows; ++r) {
        for (std::size_t c = 0; c < n && tc * n + c < a.cols; ++c) {
          const std::uint8_t v = a(tr * n + r, tc * n + c) ? 1 : 0;
          b.cells[r * n + c] = v;
          b.ones += v;
        }
      }
      blocks.push_back(std::move(b));
    }
  }
  return blocks;
}

std::int64_t mismatch_count(std::span<const std::uint8_t> data_row,
                            std::span<const CellFault> fault_row) {
  std::int64_t count = 0;
  for (std::size_t c = 0; c < data_row.size(); ++c) {
    const CellFault f = fault_row[c];
    if ((f == CellFault::SA0 && data_row[c]) || (f == CellFault::SA1 && !data_row[c])) ++count;
  }
  return count;
}

std::int64_t mismatch_count(std::span<const std::uint8_t> data_row,
                            const std::set<std::size_t>& sa0_cols,
                            const std::set<std::size_t>& sa1_cols) {
  std::int64_t count = 0;
  for (const auto c : sa0_cols) {
    if (c >= data_row.size()) throw DimensionError("SA0 column out of range");
    if (data_row[c]) ++count;
  }
  for (const auto c : sa1_cols) {
    if (c >= data_row.size()) throw DimensionError("SA1 column out of range");
    if (!data_row[c]) ++count;
  }
  return count;
}

namespace {

std::int64_t sa1_under_zero(std::span<const std::uint8_t> data_row,
                            std::span<const CellFault> fault_row) {
  std::int64_t count = 0;
  for (std::size_t c = 0; c < data_row.size(); ++c) {
    if (fault_row[c] == CellFault::SA1 && !data_row[c]) ++count;
  }
  return count;
}

void check_sizes(const Block& block, const FaultMap& faults) {
  if (block.n != faults.size()) {
    throw DimensionError(fmt::format("block of size {} vs crossbar of size {}", block.n,
                                     faults.size()));
  }
}

}  // namespace

RowAssignment evaluate_rows(const Block& block, const FaultMap& faults,
                            std::vector<std::uint32_t> permutation) {
  check_sizes(block, faults);
  RowAssignment out;
  for (std::size_t i = 0; i < block.n; ++i) {
    const auto frow = faults.row(permutation[i]);
    out.cost += mismatch_count(block.row(i), frow);
    out.sa1_nonoverlap += sa1_under_zero(block.row(i), frow);
  }
  out.permutation = std::move(permutation);
  return out;
}

RowAssignment row_match(const Block& block, const FaultMap& faults, Solver solver) {
  check_sizes(block, faults);
  const std::size_t n = block.n;
  std::vector<std::uint32_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0u);
  if (faults.empty()) return evaluate_rows(block, faults, std::move(identity));

  CostMatrix costs(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) costs(i, j) = mismatch_count(block.row(i), faults.row(j));
  }
  return evaluate_rows(block, faults, solve(costs, solver).col_of);
}

CostTables build_cost_tables(std::span<const Block> blocks, std::span<const FaultMap> faults,
                             Solver solver) {
  CostTables t;
  t.blocks = blocks.size();
  t.crossbars = faults.size();
  t.cost = CostMatrix(t.blocks, t.crossbars);
  t.sa1_nonoverlap = CostMatrix(t.blocks, t.crossbars);
  t.rows.reserve(t.blocks * t.crossbars);
  for (std::size_t i = 0; i < t.blocks; ++i) {
    for (std::size_t j = 0; j < t.crossbars; ++j) {
      t.rows.push_back(row_match(blocks[i], faults[j], solver));
      t.cost(i, j) = t.rows.back().cost;
      t.sa1_nonoverlap(i, j) = t.rows.back().sa1_nonoverlap;
    }
  }
  return t;
}

PruneResult prune(std::span<const Block> blocks, const CostTables& tables) {
  if (blocks.size() != tables.blocks) throw DimensionError("cost table / block count mismatch");
  std::vector<bool> block_alive(tables.blocks, true);
  std::vector<bool> xbar_alive(tables.crossbars, true);
  std::size_t b = tables.blocks;
  std::size_t m = tables.crossbars;
  if (b > m) {
    throw InfeasibleError(fmt::format("{} blocks cannot be mapped onto {} crossbars", b, m));
  }

  for (std::size_t j = 0; j < tables.crossbars && b > 0; ++j) {
    // Sparsest surviving block; lowest id on ties.
    std::size_t sparsest = tables.blocks;
    for (std::size_t i = 0; i < tables.blocks; ++i) {
      if (block_alive[i] && (sparsest == tables.blocks || blocks[i].ones < blocks[sparsest].ones)) {
        sparsest = i;
      }
    }
    std::int64_t min_sa1 = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < tables.blocks; ++i) {
      if (block_alive[i]) min_sa1 = std::min(min_sa1, tables.sa1_nonoverlap(i, j));
    }
    // Count-to-count comparison: density of the sparsest block times n^2 is its ones count.
    if (min_sa1 > static_cast<std::int64_t>(blocks[sparsest].ones)) {
      if (m > b) {
        xbar_alive[j] = false;
        --m;
      } else {
        block_alive[sparsest] = false;
        --b;
      }
    }
  }

  PruneResult r;
  for (std::size_t i = 0; i < tables.blocks; ++i) {
    (block_alive[i] ? r.blocks : r.removed_blocks).push_back(i);
  }
  for (std::size_t j = 0; j < tables.crossbars; ++j) {
    (xbar_alive[j] ? r.crossbars : r.removed_crossbars).push_back(j);
  }
  return r;
}

std::int64_t BlockMapping::total_cost() const {
  std::int64_t total = 0;
  for (const auto& [id, p] : assignments) total += p.rows.cost;
  return total;
}

std::int64_t BlockMapping::total_sa1_nonoverlap() const {
  std::int64_t total = 0;
  for (const auto& [id, p] : assignments) total += p.rows.sa1_nonoverlap;
  return total;
}

BlockMapping assign_blocks(std::span<const Block> blocks, std::span<const FaultMap> faults,
                           const CostTables& tables, const PruneResult& survivors, Solver solver) {
  const std::size_t b = survivors.blocks.size();
  const std::size_t m = survivors.crossbars.size();
  if (b > m) {
    throw InfeasibleError(fmt::format("{} blocks cannot be mapped onto {} crossbars", b, m));
  }
  CostMatrix sub(b, m);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      sub(i, j) = tables.cost(survivors.blocks[i], survivors.crossbars[j]);
    }
  }
  const Assignment a = solve(sub, solver);

  BlockMapping mapping;
  mapping.n = blocks.empty() ? (faults.empty() ? 0 : faults.front().size()) : blocks.front().n;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t bi = survivors.blocks[i];
    const std::size_t xj = survivors.crossbars[a.col_of[i]];
    mapping.assignments[blocks[bi].id] = {faults[xj].crossbar_id(), tables.at(bi, xj)};
  }
  for (const auto i : survivors.removed_blocks) mapping.removed_blocks.insert(blocks[i].id);
  for (const auto j : survivors.removed_crossbars) {
    mapping.removed_crossbars.insert(faults[j].crossbar_id());
  }
  return mapping;
}

BlockMapping map_fault_aware(std::span<const Block> blocks, std::span<const FaultMap> faults,
                             Solver solver) {
  const CostTables tables = build_cost_tables(blocks, faults, solver);
  return assign_blocks(blocks, faults, tables, prune(blocks, tables), solver);
}

BlockMapping map_row_major(std::span<const Block> blocks, std::span<const FaultMap> faults) {
  if (blocks.size() > faults.size()) {
    throw InfeasibleError(fmt::format("{} blocks cannot be mapped onto {} crossbars",
                                      blocks.size(), faults.size()));
  }
  BlockMapping mapping;
  mapping.n = blocks.empty() ? 0 : blocks.front().n;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::vector<std::uint32_t> identity(blocks[i].n);
    std::iota(identity.begin(), identity.end(), 0u);
    mapping.assignments[blocks[i].id] = {faults[i].crossbar_id(),
                                         evaluate_rows(blocks[i], faults[i], std::move(identity))};
  }
  return mapping;
}

namespace {

template <typename Fn>
BlockMapping rework(const BlockMapping& mapping, std::span<const Block> blocks,
                    std::span<const FaultMap> faults, Fn&& recompute) {
  std::map<int, const Block*> by_id;
  for (const auto& b : blocks) by_id[b.id] = &b;
  std::map<int, const FaultMap*> xbar_by_id;
  for (const auto& f : faults) xbar_by_id[f.crossbar_id()] = &f;

  BlockMapping out = mapping;
  for (auto& [block_id, placement] : out.assignments) {
    const auto bit = by_id.find(block_id);
    const auto xit = xbar_by_id.find(placement.crossbar_id);
    if (bit == by_id.end() || xit == xbar_by_id.end()) {
      throw DimensionError(fmt::format("mapping references unknown block {} or crossbar {}",
                                       block_id, placement.crossbar_id));
    }
    placement.rows = recompute(*bit->second, *xit->second, placement.rows);
  }
  return out;
}

}  // namespace

BlockMapping remap_rows(const BlockMapping& mapping, std::span<const Block> blocks,
                        std::span<const FaultMap> faults, Solver solver) {
  return rework(mapping, blocks, faults,
                [solver](const Block& b, const FaultMap& f, const RowAssignment& stale) {
                  RowAssignment fresh = row_match(b, f, solver);
                  // Keep the old permutation when the solver cannot beat it (suitor is approximate).
                  RowAssignment kept = evaluate_rows(b, f, stale.permutation);
                  return fresh.cost <= kept.cost ? fresh : kept;
                });
}

BlockMapping reevaluate(const BlockMapping& mapping, std::span<const Block> blocks,
                        std::span<const FaultMap> faults) {
  return rework(mapping, blocks, faults,
                [](const Block& b, const FaultMap& f, const RowAssignment& stale) {
                  return evaluate_rows(b, f, stale.permutation);
                });
}

nlohmann::json to_json(const BlockMapping& mapping) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [id, p] : mapping.assignments) {
    blocks.push_back({{"block_id", id},
                      {"crossbar_id", p.crossbar_id},
                      {"permutation", p.rows.permutation},
                      {"cost", p.rows.cost},
                      {"sa1_nonoverlap", p.rows.sa1_nonoverlap}});
  }
  return {{"n", mapping.n},
          {"blocks", blocks},
          {"removed_blocks", mapping.removed_blocks},
          {"removed_crossbars", mapping.removed_crossbars},
          {"summary",
           {{"mapped_blocks", mapping.assignments.size()},
            {"total_cost", mapping.total_cost()},
            {"total_sa1_nonoverlap", mapping.total_sa1_nonoverlap()}}}};
}

}  // namespace fare
