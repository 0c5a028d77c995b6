#include "fare/assignment.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <tuple>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

namespace {

void check_shape(const CostMatrix& costs) {
  if (costs.values.size() != costs.rows * costs.cols) {
    throw DimensionError("cost matrix storage does not match its shape");
  }
  if (costs.rows > costs.cols) {
    throw InfeasibleError(fmt::format("cannot assign {} rows to {} columns", costs.rows,
                                      costs.cols));
  }
}

}  // namespace

std::int64_t assignment_cost(const CostMatrix& costs, const std::vector<std::uint32_t>& col_of) {
  std::int64_t total = 0;
  for (std::size_t r = 0; r < col_of.size(); ++r) total += costs(r, col_of[r]);
  return total;
}

Assignment solve_exact(const CostMatrix& costs) {
  check_shape(costs);
  const std::size_t n = costs.rows;
  const std::size_t m = costs.cols;
  Assignment result;
  if (n == 0) return result;

  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  // 1-based potentials; column 0 is the virtual source.
  std::vector<std::int64_t> u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = costs(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.col_of.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) result.col_of[owner[j] - 1] = static_cast<std::uint32_t>(j - 1);
  }
  result.cost = assignment_cost(costs, result.col_of);
  return result;
}

Assignment solve_suitor(const CostMatrix& costs) {
  check_shape(costs);
  const std::size_t n = costs.rows;
  const std::size_t m = costs.cols;
  Assignment result;
  if (n == 0) return result;

  const std::int64_t w_max = *std::max_element(costs.values.begin(), costs.values.end()) + 1;
  auto weight = [&](std::size_t r, std::size_t c) { return w_max - costs(r, c); };

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> suitor(m, kNone);
  std::vector<std::int64_t> offer(m, 0);  // all real weights are >= 1

  for (std::size_t start = 0; start < n; ++start) {
    std::size_t current = start;
    while (current != kNone) {
      std::size_t best = kNone;
      std::int64_t best_w = 0;
      for (std::size_t c = 0; c < m; ++c) {
        const std::int64_t w = weight(current, c);
        // Strict comparisons: an equal offer never displaces the sitting suitor,
        // and the lowest column wins among equals.
        if (w > offer[c] && w > best_w) {
          best = c;
          best_w = w;
        }
      }
      if (best == kNone) break;
      const std::size_t displaced = suitor[best];
      suitor[best] = current;
      offer[best] = best_w;
      current = displaced;
    }
  }

  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  result.col_of.assign(n, kUnset);
  for (std::size_t c = 0; c < m; ++c) {
    if (suitor[c] != kNone) result.col_of[suitor[c]] = static_cast<std::uint32_t>(c);
  }

  // Leftovers: cheapest (cost, row, col) triples first.
  std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < n; ++r) {
    if (result.col_of[r] != kUnset) continue;
    for (std::size_t c = 0; c < m; ++c) {
      if (suitor[c] == kNone) edges.emplace_back(costs(r, c), r, c);
    }
  }
  std::sort(edges.begin(), edges.end());
  for (const auto& [cost, r, c] : edges) {
    if (result.col_of[r] != kUnset || suitor[c] != kNone) continue;
    result.col_of[r] = static_cast<std::uint32_t>(c);
    suitor[c] = r;
  }
  result.cost = assignment_cost(costs, result.col_of);
  return result;
}

Assignment solve(const CostMatrix& costs, Solver solver) {
  return solver == Solver::Exact ? solve_exact(costs) : solve_suitor(costs);
}

const char* to_string(Solver solver) { return solver == Solver::Exact ? "exact" : "suitor"; }

Solver parse_solver(const std::string& name) {
  if (name == "exact") return Solver::Exact;
  if (name == "suitor") return Solver::Suitor;
  throw ConfigError(fmt::format("unknown solver '{}' (expected exact or suitor)", name));
}

}  // namespace fare
