#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fare/fixedpoint.hpp"

namespace fare {

enum class CellFault : std::uint8_t { None = 0, SA0 = 1, SA1 = 2 };

enum class CrossbarMode { Weight, Adjacency };

struct CellCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

/// Stuck-at cells of one n x n crossbar. A cell carries at most one fault, so
/// the SA0 and SA1 sets are disjoint by construction.
class FaultMap {
 public:
  FaultMap() = default;
  FaultMap(int crossbar_id, std::size_t n);

  int crossbar_id() const { return id_; }
  std::size_t size() const { return n_; }

  CellFault at(std::size_t row, std::size_t col) const { return cells_[row * n_ + col]; }
  std::span<const CellFault> row(std::size_t r) const {
    return {cells_.data() + r * n_, n_};
  }

  /// Marks a cell stuck. Re-marking with the same type is a no-op; marking an
  /// already-faulty cell with the other type throws.
  void add(std::size_t row, std::size_t col, CellFault type);

  std::vector<CellCoord> sa0() const;
  std::vector<CellCoord> sa1() const;
  std::size_t sa0_count() const { return sa0_count_; }
  std::size_t sa1_count() const { return sa1_count_; }
  std::size_t fault_count() const { return sa0_count_ + sa1_count_; }
  bool empty() const { return fault_count() == 0; }

  /// True when every fault of `other` is also present here with the same type.
  bool contains(const FaultMap& other) const;

  friend bool operator==(const FaultMap&, const FaultMap&) = default;

 private:
  int id_ = 0;
  std::size_t n_ = 0;
  std::vector<CellFault> cells_;
  std::size_t sa0_count_ = 0;
  std::size_t sa1_count_ = 0;
};

/// Value a stuck cell reads back in the given mode.
std::uint8_t stuck_value(CellFault fault, CrossbarMode mode);

/// n x n array of 2-bit cells. Writes go through the attached fault map, so a
/// stuck cell never reflects the written value.
class Crossbar {
 public:
  Crossbar(int id, std::size_t n, CrossbarMode mode);
  Crossbar(CrossbarMode mode, FaultMap faults);

  int id() const { return id_; }
  std::size_t size() const { return n_; }
  CrossbarMode mode() const { return mode_; }
  const FaultMap& faults() const { return faults_; }

  /// Replaces the fault map (e.g. after a BIST scan) and forces newly stuck
  /// cells to their stuck value.
  void set_faults(FaultMap faults);

  /// `data` is row-major n*n. Throws DimensionError on size mismatch and
  /// ConfigError when a value is out of range for the mode.
  void write(std::span<const std::uint8_t> data);

  std::uint8_t cell(std::size_t row, std::size_t col) const { return cells_[row * n_ + col]; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  /// Column outputs M^T * input of the stored binary matrix (adjacency mode).
  std::vector<double> mvm(std::span<const double> input) const;

 private:
  void apply_faults();

  int id_;
  std::size_t n_;
  CrossbarMode mode_;
  FaultMap faults_;
  std::vector<std::uint8_t> cells_;
};

/// Weight-mode MVM. Every group of eight adjacent columns holds one logical
/// weight column, LSB slice first; each weight is decoded from its eight
/// post-fault cells and the dense product is formed in real arithmetic.
/// Returns n / 8 outputs.
std::vector<double> mvm_weights(const Crossbar& xbar, std::span<const double> input,
                                const FixedPointCodec& codec, bool clip);

/// Logical weight matrix tiled over a grid of weight-mode crossbars. Logical
/// column j lives in physical column group `placement[j]`.
class WeightArray {
 public:
  /// `faults` must hold row_tiles() * col_tiles() maps (or be empty for a
  /// fault-free array); ids are taken from the maps.
  WeightArray(std::size_t rows, std::size_t cols, std::size_t n, std::vector<FaultMap> faults,
              int first_id = 0);

  static std::size_t row_tiles(std::size_t rows, std::size_t n);
  static std::size_t col_tiles(std::size_t cols, std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t crossbar_size() const { return n_; }
  std::span<const Crossbar> crossbars() const { return xbars_; }
  std::vector<FaultMap> fault_maps() const;
  void set_faults(std::span<const FaultMap> faults);

  std::span<const std::uint32_t> placement() const { return placement_; }
  void set_placement(std::vector<std::uint32_t> placement);

  /// Fault state of the cell holding slice `slice` of row `row` in column group `group`.
  CellFault fault_at(std::size_t row, std::size_t group, int slice) const;

  /// Encodes and stores a row-major rows x cols weight matrix. With
  /// `clip_on_write` the values are clipped to tau before encoding.
  void write(std::span<const double> weights, const FixedPointCodec& codec, bool clip_on_write);

  /// Decoded post-fault weights, row-major rows x cols.
  std::vector<double> effective(const FixedPointCodec& codec, bool clip) const;

  /// input (length rows) times the stored matrix, decoded per weight.
  std::vector<double> mvm(std::span<const double> input, const FixedPointCodec& codec,
                          bool clip) const;

 private:
  SliceVector read_slices(std::size_t row, std::size_t group) const;
  std::size_t tile_index(std::size_t phys_row, std::size_t phys_col) const;

  std::size_t rows_;
  std::size_t cols_;
  std::size_t n_;
  std::size_t col_tiles_;
  std::vector<Crossbar> xbars_;
  std::vector<std::uint32_t> placement_;
};

/// Fault-map CSV: `crossbar_id,row,col,type[,epoch]` with a leading
/// `# crossbars=<m> n=<n>` metadata comment.
void write_fault_csv(std::ostream& out, std::span<const FaultMap> maps);
void write_fault_history_row(std::ostream& out, const FaultMap& map, int epoch);
void write_fault_history_header(std::ostream& out);

/// Parses the CSV above. Crossbar count and size come from the metadata line
/// when present, otherwise from `n` and the largest id seen.
std::vector<FaultMap> read_fault_csv(std::istream& in, std::optional<std::size_t> n = {},
                                     std::optional<std::size_t> crossbars = {});

/// Dense debug dump of stored cell values, one CSV row per crossbar row.
void dump_cells_csv(std::ostream& out, const Crossbar& xbar);

}  // namespace fare
