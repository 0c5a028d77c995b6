#include "fare/faults.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

void FaultModel::validate() const {
  if (!(density >= 0.0) || density > kMaxDensity) {
    throw ConfigError(fmt::format("fault density {} outside [0, {}]", density, kMaxDensity));
  }
  // A zero component is allowed so SA0-only / SA1-only populations can be modelled.
  if (!(ratio.sa0 >= 0.0) || !(ratio.sa1 >= 0.0) || !(ratio.sa0 + ratio.sa1 > 0.0)) {
    throw ConfigError("SA0:SA1 ratio components must be non-negative and not both zero");
  }
}

void PostDeploymentSchedule::validate() const {
  if (!(total_added_density >= 0.0) || total_added_density > 1.0) {
    throw ConfigError("post-deployment density must lie in [0, 1]");
  }
  if (epochs < 1) throw ConfigError("post-deployment schedule needs at least one epoch");
}

double PostDeploymentSchedule::per_epoch_increment() const {
  return total_added_density / epochs;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Draws `count` new faults on healthy cells of `map`.
void sprinkle(FaultMap& map, std::size_t count, double sa0_fraction, std::mt19937_64& rng) {
  const std::size_t n = map.size();
  const std::size_t free_cells = n * n - map.fault_count();
  count = std::min(count, free_cells);
  std::uniform_int_distribution<std::size_t> pick(0, n * n - 1);
  std::bernoulli_distribution is_sa0(sa0_fraction);
  for (std::size_t placed = 0; placed < count;) {
    const std::size_t cell = pick(rng);
    if (map.at(cell / n, cell % n) != CellFault::None) continue;  // collision: resample
    map.add(cell / n, cell % n, is_sa0(rng) ? CellFault::SA0 : CellFault::SA1);
    ++placed;
  }
}

std::size_t poisson_count(double lambda, std::mt19937_64& rng) {
  if (lambda <= 0.0) return 0;
  std::poisson_distribution<long long> dist(lambda);
  return static_cast<std::size_t>(dist(rng));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

std::vector<FaultMap> inject(const FaultModel& model, std::size_t crossbars, std::size_t n,
                             int first_id) {
  model.validate();
  if (crossbars == 0) throw ConfigError("inject needs at least one crossbar");
  if (n == 0) throw ConfigError("crossbar size must be positive");
  const double lambda = model.density * static_cast<double>(n * n);
  std::vector<FaultMap> maps;
  maps.reserve(crossbars);
  for (std::size_t i = 0; i < crossbars; ++i) {
    const int id = first_id + static_cast<int>(i);
    FaultMap map(id, n);
    std::mt19937_64 rng(derive_seed(model.seed, static_cast<std::uint64_t>(id)));
    const std::size_t count = std::min(poisson_count(lambda, rng), n * n);
    sprinkle(map, count, model.ratio.sa0_fraction(), rng);
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<FaultMap> Bist::scan(std::span<const FaultMap> maps) {
  ++scans_;
  return {maps.begin(), maps.end()};
}

std::vector<FaultMap> advance_epoch(std::span<const FaultMap> maps,
                                    const PostDeploymentSchedule& schedule,
                                    const FaultModel& model, int epoch_index) {
  schedule.validate();
  if (epoch_index < 0 || epoch_index >= schedule.epochs) {
    throw ConfigError(
        fmt::format("epoch index {} outside schedule of {} epochs", epoch_index, schedule.epochs));
  }
  std::vector<FaultMap> out(maps.begin(), maps.end());
  const double inc = schedule.per_epoch_increment();
  if (inc <= 0.0) return out;
  for (auto& map : out) {
    const std::size_t n = map.size();
    std::mt19937_64 rng(derive_seed(model.seed, static_cast<std::uint64_t>(map.crossbar_id()),
                                    static_cast<std::uint64_t>(epoch_index) + 1));
    sprinkle(map, poisson_count(inc * static_cast<double>(n * n), rng),
             model.ratio.sa0_fraction(), rng);
  }
  return out;
}

}  // namespace fare
