#include <doctest.h>

#include <random>
#include <set>

#include "fare/error.hpp"
#include "fare/faults.hpp"
#include "fare/mapper.hpp"
#include "oracles.hpp"

using namespace fare;

namespace {

Block make_block(std::size_t n, const std::vector<std::uint8_t>& cells, int id = 0) {
  Block b;
  b.id = id;
  b.n = n;
  b.cells = cells;
  for (const auto v : cells) b.ones += v;
  return b;
}

Block random_block(std::mt19937_64& rng, std::size_t n, double p, int id = 0) {
  std::bernoulli_distribution bit(p);
  std::vector<std::uint8_t> cells(n * n);
  for (auto& c : cells) c = bit(rng);
  return make_block(n, cells, id);
}

FaultMap random_faults(std::mt19937_64& rng, std::size_t n, double p, int id = 0) {
  FaultMap f(id, n);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = u(rng);
      if (x < p / 2) f.add(r, c, CellFault::SA0);
      else if (x < p) f.add(r, c, CellFault::SA1);
    }
  }
  return f;
}

std::vector<std::vector<int>> rows_of(const Block& b) {
  std::vector<std::vector<int>> out(b.n, std::vector<int>(b.n));
  for (std::size_t r = 0; r < b.n; ++r) {
    for (std::size_t c = 0; c < b.n; ++c) out[r][c] = b.cells[r * b.n + c];
  }
  return out;
}

std::vector<std::vector<int>> stuck_of(const FaultMap& f) {
  std::vector<std::vector<int>> out(f.size(), std::vector<int>(f.size(), -1));
  for (std::size_t r = 0; r < f.size(); ++r) {
    for (std::size_t c = 0; c < f.size(); ++c) {
      if (f.at(r, c) == CellFault::SA0) out[r][c] = 0;
      if (f.at(r, c) == CellFault::SA1) out[r][c] = 1;
    }
  }
  return out;
}

bool is_bijection(const std::vector<std::uint32_t>& p) {
  std::set<std::uint32_t> s(p.begin(), p.end());
  return s.size() == p.size() && (p.empty() || *s.rbegin() == p.size() - 1);
}

}  // namespace

TEST_CASE("block decomposition") {
  BinaryMatrix a(4, 4);
  for (std::size_t i = 0; i < 16; ++i) a.values[i] = (i * 7) % 3 == 0;
  const auto single = block_decompose(a, 4);
  REQUIRE(single.size() == 1);
  CHECK(single[0].cells == a.values);

  const auto four = block_decompose(a, 2);
  REQUIRE(four.size() == 4);
  CHECK(four[0].cells == std::vector<std::uint8_t>{a(0, 0), a(0, 1), a(1, 0), a(1, 1)});
  CHECK(four[1].tile_col == 1);
  CHECK(four[2].tile_row == 1);

  BinaryMatrix five(5, 5);
  std::fill(five.values.begin(), five.values.end(), 1);
  const auto nine = block_decompose(five, 2);
  REQUIRE(nine.size() == 9);
  CHECK(nine[8].cells == std::vector<std::uint8_t>{1, 0, 0, 0});  // padded corner
  CHECK(nine[2].cells == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(nine[6].cells == std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(nine[0].edge_density() == 1.0);
  CHECK(nine[8].edge_density() == 0.25);
}

TEST_CASE("mismatch count") {
  const std::vector<std::uint8_t> row{1, 0, 1, 0};
  CHECK(mismatch_count(row, {}, {}) == 0);
  CHECK(mismatch_count(row, {0}, {3}) == 2);
  CHECK(mismatch_count(std::vector<std::uint8_t>{1, 1, 1, 1}, {}, {0, 2}) == 0);
  CHECK_THROWS_AS(mismatch_count(row, {4}, {}), DimensionError);

  FaultMap f(0, 4);
  f.add(0, 0, CellFault::SA0);
  f.add(0, 3, CellFault::SA1);
  CHECK(mismatch_count(row, f.row(0)) == 2);
}

TEST_CASE("row match small cases") {
  const Block b = make_block(2, {1, 0, 0, 0});
  const auto none = row_match(b, FaultMap(0, 2), Solver::Exact);
  CHECK(none.permutation == std::vector<std::uint32_t>{0, 1});
  CHECK(none.cost == 0);

  FaultMap f(0, 2);
  f.add(0, 0, CellFault::SA1);
  const auto r = row_match(b, f, Solver::Exact);
  CHECK(r.permutation == std::vector<std::uint32_t>{0, 1});
  CHECK(r.cost == 0);
  CHECK(r.sa1_nonoverlap == 0);

  // the row with the one must move onto the SA1 row
  FaultMap g(0, 2);
  g.add(1, 0, CellFault::SA1);
  const auto s = row_match(b, g, Solver::Exact);
  CHECK(s.permutation == std::vector<std::uint32_t>{1, 0});
  CHECK(s.cost == 0);

  CHECK_THROWS_AS(row_match(b, FaultMap(0, 3), Solver::Exact), DimensionError);
}

TEST_CASE("row match exact equals brute force") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = std::uniform_int_distribution<int>(2, 6)(rng);
    const Block b = random_block(rng, n, 0.4);
    const FaultMap f = random_faults(rng, n, 0.3);
    const auto r = row_match(b, f, Solver::Exact);
    REQUIRE(is_bijection(r.permutation));
    CHECK(r.cost == oracle::brute_force_rows(rows_of(b), stuck_of(f)));
    const std::vector<int> perm(r.permutation.begin(), r.permutation.end());
    CHECK(r.cost == oracle::perm_cost(rows_of(b), stuck_of(f), perm));
  }
}

TEST_CASE("row match suitor is valid and no better than exact") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 8;
    const Block b = random_block(rng, n, 0.3);
    const FaultMap f = random_faults(rng, n, 0.2);
    const auto s = row_match(b, f, Solver::Suitor);
    REQUIRE(is_bijection(s.permutation));
    CHECK(s.cost >= row_match(b, f, Solver::Exact).cost);
    CHECK(s == evaluate_rows(b, f, s.permutation));
  }
}

TEST_CASE("prune: fault-free crossbars prune nothing") {
  std::mt19937_64 rng(1);
  std::vector<Block> blocks{random_block(rng, 4, 0.3, 0), random_block(rng, 4, 0.3, 1)};
  std::vector<FaultMap> xbars{FaultMap(0, 4), FaultMap(1, 4), FaultMap(2, 4)};
  const auto t = build_cost_tables(blocks, xbars, Solver::Exact);
  const auto p = prune(blocks, t);
  CHECK(p.removed_blocks.empty());
  CHECK(p.removed_crossbars.empty());
}

TEST_CASE("prune: uncoverable SA1 removes the crossbar when spares exist") {
  const Block zero = make_block(2, {0, 0, 0, 0});
  FaultMap bad(0, 2);
  bad.add(0, 1, CellFault::SA1);
  std::vector<Block> blocks{zero};
  std::vector<FaultMap> xbars{bad, FaultMap(1, 2)};
  const auto t = build_cost_tables(blocks, xbars, Solver::Exact);
  const auto p = prune(blocks, t);
  CHECK(p.removed_crossbars == std::vector<std::size_t>{0});
  CHECK(p.removed_blocks.empty());
  const auto m = assign_blocks(blocks, xbars, t, p, Solver::Exact);
  CHECK(m.assignments.at(0).crossbar_id == 1);
  CHECK(m.total_cost() == 0);
  CHECK(m.removed_crossbars == std::set<int>{0});
}

TEST_CASE("prune: without spares the sparsest block goes") {
  const Block zero = make_block(2, {0, 0, 0, 0}, 0);
  const Block dense = make_block(2, {1, 1, 1, 0}, 1);
  FaultMap bad(0, 2);
  bad.add(0, 1, CellFault::SA1);
  bad.add(1, 1, CellFault::SA1);
  std::vector<Block> blocks{zero, dense};
  std::vector<FaultMap> xbars{bad, FaultMap(1, 2)};
  // best block on crossbar 0 leaves one SA1 uncovered (dense), sparsest has 0 ones
  const auto t = build_cost_tables(blocks, xbars, Solver::Exact);
  CHECK(t.sa1_nonoverlap(1, 0) == 1);
  const auto p = prune(blocks, t);
  CHECK(p.removed_blocks == std::vector<std::size_t>{0});
  CHECK(p.removed_crossbars.empty());
  const auto m = map_fault_aware(blocks, xbars, Solver::Exact);
  CHECK(m.removed_blocks == std::set<int>{0});
  CHECK(m.assignments.size() == 1);
}

TEST_CASE("too many blocks is infeasible") {
  std::vector<Block> blocks{make_block(2, {0, 0, 0, 0}, 0), make_block(2, {0, 0, 0, 0}, 1)};
  std::vector<FaultMap> xbars{FaultMap(0, 2)};
  CHECK_THROWS_AS(map_fault_aware(blocks, xbars, Solver::Exact), InfeasibleError);
  CHECK_THROWS_AS(map_row_major(blocks, xbars), InfeasibleError);
}

TEST_CASE("assign blocks: exact equals brute force over placements") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    const std::size_t b = std::uniform_int_distribution<int>(1, 4)(rng);
    const std::size_t m = b + std::uniform_int_distribution<int>(0, 2)(rng);
    std::vector<Block> blocks;
    std::vector<FaultMap> xbars;
    for (std::size_t i = 0; i < b; ++i) blocks.push_back(random_block(rng, 4, 0.4, static_cast<int>(i)));
    for (std::size_t j = 0; j < m; ++j) xbars.push_back(random_faults(rng, 4, 0.1, static_cast<int>(j)));
    const auto tables = build_cost_tables(blocks, xbars, Solver::Exact);
    PruneResult all;
    for (std::size_t i = 0; i < b; ++i) all.blocks.push_back(i);
    for (std::size_t j = 0; j < m; ++j) all.crossbars.push_back(j);
    const auto mapping = assign_blocks(blocks, xbars, tables, all, Solver::Exact);
    std::vector<std::vector<long>> cost(b, std::vector<long>(m));
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        cost[i][j] = oracle::brute_force_rows(rows_of(blocks[i]), stuck_of(xbars[j]));
      }
    }
    CHECK(mapping.total_cost() == oracle::brute_force_assignment(cost));
    std::set<int> used;
    for (const auto& [id, p] : mapping.assignments) used.insert(p.crossbar_id);
    CHECK(used.size() == b);
  }
}

TEST_CASE("fault-aware mapping never costs more than row-major") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    std::vector<Block> blocks;
    std::vector<FaultMap> xbars;
    for (int i = 0; i < 4; ++i) blocks.push_back(random_block(rng, 8, 0.15, i));
    for (int j = 0; j < 6; ++j) xbars.push_back(random_faults(rng, 8, 0.05, j));
    const auto aware = map_fault_aware(blocks, xbars, Solver::Exact);
    const auto naive = map_row_major(blocks, xbars);
    // removed blocks are served fault-free, so they only lower the cost
    CHECK(aware.total_cost() <= naive.total_cost());
  }
}

TEST_CASE("zero faults cost nothing") {
  std::mt19937_64 rng(2);
  std::vector<Block> blocks;
  for (int i = 0; i < 3; ++i) blocks.push_back(random_block(rng, 8, 0.3, i));
  const std::vector<FaultMap> xbars{FaultMap(0, 8), FaultMap(1, 8), FaultMap(2, 8)};
  const auto m = map_fault_aware(blocks, xbars, Solver::Exact);
  CHECK(m.total_cost() == 0);
  CHECK(m.removed_blocks.empty());
  for (const auto& [id, p] : m.assignments) {
    CHECK(p.crossbar_id == id);
    CHECK(p.rows.permutation == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7});
  }
}

TEST_CASE("remap rows") {
  // no new faults: unchanged
  std::mt19937_64 rng(4);
  std::vector<Block> blocks{random_block(rng, 6, 0.3, 0), random_block(rng, 6, 0.3, 1)};
  std::vector<FaultMap> xbars{random_faults(rng, 6, 0.1, 0), random_faults(rng, 6, 0.1, 1)};
  const auto m = map_fault_aware(blocks, xbars, Solver::Exact);
  const auto same = remap_rows(m, blocks, xbars, Solver::Exact);
  for (const auto& [id, p] : m.assignments) {
    CHECK(same.assignments.at(id).crossbar_id == p.crossbar_id);
    CHECK(same.assignments.at(id).rows == p.rows);
  }

  // constructed: one new SA1 under a zero that a swap can cover
  const Block b = make_block(4, {1, 0, 0, 0,  //
                                 0, 0, 0, 0,  //
                                 0, 0, 0, 0,  //
                                 0, 0, 0, 0});
  std::vector<Block> one{b};
  std::vector<FaultMap> clean{FaultMap(0, 4)};
  const auto base = map_fault_aware(one, clean, Solver::Exact);
  CHECK(base.assignments.at(0).rows.permutation == std::vector<std::uint32_t>{0, 1, 2, 3});
  FaultMap grown(0, 4);
  grown.add(2, 0, CellFault::SA1);
  std::vector<FaultMap> after{grown};
  const auto stale = reevaluate(base, one, after);
  const auto fresh = remap_rows(base, one, after, Solver::Exact);
  CHECK(stale.total_cost() == 1);
  CHECK(fresh.total_cost() == 0);
  CHECK(fresh.assignments.at(0).rows.permutation[0] == 2);
  CHECK(fresh.total_cost() ==
        oracle::brute_force_rows(rows_of(b), stuck_of(grown)));
}

TEST_CASE("remap never exceeds the stale permutation") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    std::vector<Block> blocks{random_block(rng, 8, 0.2, 0), random_block(rng, 8, 0.2, 1)};
    const FaultModel model{0.02, {9, 1}, static_cast<std::uint64_t>(t)};
    auto faults = inject(model, 3, 8);
    for (const auto solver : {Solver::Exact, Solver::Suitor}) {
      const auto m = map_fault_aware(blocks, faults, solver);
      const auto grown = advance_epoch(faults, {0.05, 1}, model, 0);
      CHECK(remap_rows(m, blocks, grown, solver).total_cost() <=
            reevaluate(m, blocks, grown).total_cost());
    }
  }
}

TEST_CASE("mapping json") {
  std::vector<Block> blocks{make_block(2, {1, 0, 0, 1}, 0)};
  std::vector<FaultMap> xbars{FaultMap(7, 2)};
  const auto j = to_json(map_fault_aware(blocks, xbars, Solver::Exact));
  CHECK(j["blocks"][0]["crossbar_id"] == 7);
  CHECK(j["blocks"][0]["permutation"] == nlohmann::json::array({0, 1}));
  CHECK(j["summary"]["total_cost"] == 0);
}
