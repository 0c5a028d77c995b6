#include <doctest.h>

#include <random>
#include <set>

#include "fare/assignment.hpp"
#include "fare/error.hpp"
#include "oracles.hpp"

using namespace fare;

namespace {

CostMatrix random_costs(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int max) {
  std::uniform_int_distribution<int> d(0, max);
  CostMatrix c(rows, cols);
  for (auto& v : c.values) v = d(rng);
  return c;
}

std::vector<std::vector<long>> nested(const CostMatrix& c) {
  std::vector<std::vector<long>> out(c.rows, std::vector<long>(c.cols));
  for (std::size_t r = 0; r < c.rows; ++r) {
    for (std::size_t k = 0; k < c.cols; ++k) out[r][k] = c(r, k);
  }
  return out;
}

bool injective(const Assignment& a, std::size_t cols) {
  std::set<std::uint32_t> seen(a.col_of.begin(), a.col_of.end());
  if (seen.size() != a.col_of.size()) return false;
  for (const auto c : a.col_of) {
    if (c >= cols) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("exact solver matches brute force") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 6);
  for (int t = 0; t < 300; ++t) {
    const std::size_t rows = size(rng);
    const std::size_t cols = rows + std::uniform_int_distribution<int>(0, 2)(rng);
    const auto c = random_costs(rng, rows, cols, 20);
    const auto a = solve_exact(c);
    REQUIRE(injective(a, cols));
    CHECK(a.cost == assignment_cost(c, a.col_of));
    CHECK(a.cost == oracle::brute_force_assignment(nested(c)));
  }
}

TEST_CASE("exact solver prefers identity on ties") {
  CostMatrix zero(4, 4, 0);
  CHECK(solve_exact(zero).col_of == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(solve_suitor(zero).col_of == std::vector<std::uint32_t>{0, 1, 2, 3});
}

TEST_CASE("suitor produces a valid assignment") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t rows = std::uniform_int_distribution<int>(1, 12)(rng);
    const std::size_t cols = rows + std::uniform_int_distribution<int>(0, 3)(rng);
    const auto c = random_costs(rng, rows, cols, 50);
    const auto a = solve_suitor(c);
    REQUIRE(injective(a, cols));
    CHECK(a.cost == assignment_cost(c, a.col_of));
    CHECK(a.cost >= solve_exact(c).cost);
  }
}

TEST_CASE("suitor is a half approximation in the transformed weights") {
  // The guarantee of the proposal scheme holds for the maximisation it runs:
  // sum (W - cost) of the suitor matching >= half of the best such sum.
  std::mt19937_64 rng(13);
  for (int t = 0; t < 500; ++t) {
    const std::size_t rows = std::uniform_int_distribution<int>(1, 12)(rng);
    const std::size_t cols = rows + std::uniform_int_distribution<int>(0, 3)(rng);
    const auto c = random_costs(rng, rows, cols, 40);
    const std::int64_t w = *std::max_element(c.values.begin(), c.values.end()) + 1;
    const auto s = solve_suitor(c);
    const auto e = solve_exact(c);
    const std::int64_t n = static_cast<std::int64_t>(rows);
    CHECK(2 * (n * w - s.cost) >= n * w - e.cost);
  }
}

TEST_CASE("suitor finds the optimum on a dominant diagonal") {
  CostMatrix c(3, 3, 9);
  c(0, 2) = 0;
  c(1, 0) = 0;
  c(2, 1) = 0;
  CHECK(solve_suitor(c).col_of == std::vector<std::uint32_t>{2, 0, 1});
  CHECK(solve_suitor(c).cost == 0);
}

TEST_CASE("infeasible shapes") {
  CHECK_THROWS_AS(solve_exact(CostMatrix(3, 2)), InfeasibleError);
  CHECK_THROWS_AS(solve_suitor(CostMatrix(3, 2)), InfeasibleError);
  CHECK(solve_exact(CostMatrix(0, 3)).col_of.empty());
}

TEST_CASE("solver names") {
  CHECK(parse_solver("exact") == Solver::Exact);
  CHECK(parse_solver("suitor") == Solver::Suitor);
  CHECK(std::string(to_string(Solver::Suitor)) == "suitor");
  CHECK_THROWS_AS(parse_solver("greedy"), ConfigError);
}
