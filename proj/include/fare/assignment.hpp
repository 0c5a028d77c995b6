#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fare {

/// Dense row-major rows x cols matrix of non-negative integer costs.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, std::int64_t fill = 0)
      : rows(r), cols(c), values(r * c, fill) {}

  std::int64_t& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

enum class Solver { Exact, Suitor };

/// Assignment of every row to a distinct column; `col_of[r]` is the column of row r.
struct Assignment {
  std::vector<std::uint32_t> col_of;
  std::int64_t cost = 0;
};

/// Minimum-cost assignment (Hungarian method with potentials, O(rows^2 cols)).
/// Requires rows <= cols.
Assignment solve_exact(const CostMatrix& costs);

/// Suitor half-approximation. Costs become weights (W_max - cost) and the
/// rows propose to their heaviest available column, displacing lighter
/// suitors. Rows left without a partner are paired greedily by ascending cost.
Assignment solve_suitor(const CostMatrix& costs);

Assignment solve(const CostMatrix& costs, Solver solver);

std::int64_t assignment_cost(const CostMatrix& costs, const std::vector<std::uint32_t>& col_of);

const char* to_string(Solver solver);
Solver parse_solver(const std::string& name);

}  // namespace fare
