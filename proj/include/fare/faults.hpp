#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fare/crossbar.hpp"

namespace fare {

/// Relative weights of SA0 and SA1 faults, e.g. 9:1.
struct SaRatio {
  double sa0 = 9.0;
  double sa1 = 1.0;

  double sa0_fraction() const { return sa0 / (sa0 + sa1); }
};

/// Fault population: Poisson-distributed counts across crossbars, uniform
/// placement within a crossbar.
struct FaultModel {
  static constexpr double kMaxDensity = 0.05;

  double density = 0.0;
  SaRatio ratio{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct PostDeploymentSchedule {
  double total_added_density = 0.01;
  int epochs = 100;

  void validate() const;
  double per_epoch_increment() const;
};

/// Deterministic sub-seed for an independent stream (splitmix64 over the keys).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// One fault map per crossbar, ids first_id .. first_id+m-1.
std::vector<FaultMap> inject(const FaultModel& model, std::size_t crossbars, std::size_t n,
                             int first_id = 0);

/// Perfect built-in self test: returns the exact fault state and counts scans
/// so the timing model can charge its overhead.
class Bist {
 public:
  std::vector<FaultMap> scan(std::span<const FaultMap> maps);
  std::size_t scans() const { return scans_; }

 private:
  std::size_t scans_ = 0;
};

/// Adds the per-epoch post-deployment increment on fault-free cells only.
/// Existing faults are permanent.
std::vector<FaultMap> advance_epoch(std::span<const FaultMap> maps,
                                    const PostDeploymentSchedule& schedule,
                                    const FaultModel& model, int epoch_index);

}  // namespace fare
