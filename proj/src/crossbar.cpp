#include "fare/crossbar.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "fare/error.hpp"

namespace fare {

FaultMap::FaultMap(int crossbar_id, std::size_t n)
    : id_(crossbar_id), n_(n), cells_(n * n, CellFault::None) {}

void FaultMap::add(std::size_t row, std::size_t col, CellFault type) {
  if (row >= n_ || col >= n_) {
    throw DimensionError(fmt::format("fault ({}, {}) outside {}x{} crossbar {}", row, col, n_,
                                     n_, id_));
  }
  if (type == CellFault::None) return;
  CellFault& cell = cells_[row * n_ + col];
  if (cell == type) return;
  if (cell != CellFault::None) {
    throw ConfigError(fmt::format("cell ({}, {}) of crossbar {} cannot be both SA0 and SA1",
                                  row, col, id_));
  }
  cell = type;
  (type == CellFault::SA0 ? sa0_count_ : sa1_count_)++;
}

namespace {

std::vector<CellCoord> collect(const std::vector<CellFault>& cells, std::size_t n,
                               CellFault type) {
  std::vector<CellCoord> out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] == type) {
      out.push_back({static_cast<std::uint32_t>(i / n), static_cast<std::uint32_t>(i % n)});
    }
  }
  return out;
}

}  // namespace

std::vector<CellCoord> FaultMap::sa0() const { return collect(cells_, n_, CellFault::SA0); }
std::vector<CellCoord> FaultMap::sa1() const { return collect(cells_, n_, CellFault::SA1); }

bool FaultMap::contains(const FaultMap& other) const {
  if (other.n_ != n_) return false;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (other.cells_[i] != CellFault::None && other.cells_[i] != cells_[i]) return false;
  }
  return true;
}

std::uint8_t stuck_value(CellFault fault, CrossbarMode mode) {
  switch (fault) {
    case CellFault::SA0:
      return 0;
    case CellFault::SA1:
      return mode == CrossbarMode::Weight ? FixedPointCodec::kCellMax : 1;
    case CellFault::None:
      break;
  }
  throw std::logic_error("stuck_value on a healthy cell");
}

Crossbar::Crossbar(int id, std::size_t n, CrossbarMode mode)
    : Crossbar(mode, FaultMap(id, n)) {}

Crossbar::Crossbar(CrossbarMode mode, FaultMap faults)
    : id_(faults.crossbar_id()),
      n_(faults.size()),
      mode_(mode),
      faults_(std::move(faults)),
      cells_(n_ * n_, 0) {
  apply_faults();
}

void Crossbar::set_faults(FaultMap faults) {
  if (faults.size() != n_) {
    throw DimensionError(
        fmt::format("fault map of size {} for crossbar of size {}", faults.size(), n_));
  }
  faults_ = std::move(faults);
  apply_faults();
}

void Crossbar::write(std::span<const std::uint8_t> data) {
  if (data.size() != n_ * n_) {
    throw DimensionError(fmt::format("crossbar {} expects {} cells, got {}", id_, n_ * n_,
                                     data.size()));
  }
  const std::uint8_t limit = mode_ == CrossbarMode::Weight ? FixedPointCodec::kCellMax : 1;
  for (const auto v : data) {
    if (v > limit) {
      throw ConfigError(fmt::format("cell value {} invalid for crossbar {}", v, id_));
    }
  }
  std::copy(data.begin(), data.end(), cells_.begin());
  apply_faults();
}

void Crossbar::apply_faults() {
  if (faults_.empty()) return;
  for (std::size_t r = 0; r < n_; ++r) {
    const auto frow = faults_.row(r);
    for (std::size_t c = 0; c < n_; ++c) {
      if (frow[c] != CellFault::None) cells_[r * n_ + c] = stuck_value(frow[c], mode_);
    }
  }
}

std::vector<double> Crossbar::mvm(std::span<const double> input) const {
  if (mode_ != CrossbarMode::Adjacency) {
    throw DimensionError("weight-mode crossbars are read through mvm_weights");
  }
  if (input.size() != n_) {
    throw DimensionError(fmt::format("mvm input length {} != {}", input.size(), n_));
  }
  std::vector<double> out(n_, 0.0);
  for (std::size_t r = 0; r < n_; ++r) {
    const double x = input[r];
    const std::uint8_t* row = cells_.data() + r * n_;
    for (std::size_t c = 0; c < n_; ++c) {
      if (row[c]) out[c] += x;
    }
  }
  return out;
}

std::vector<double> mvm_weights(const Crossbar& xbar, std::span<const double> input,
                                const FixedPointCodec& codec, bool clip) {
  const std::size_t n = xbar.size();
  if (xbar.mode() != CrossbarMode::Weight) {
    throw DimensionError("mvm_weights requires a weight-mode crossbar");
  }
  if (n % FixedPointCodec::kSlices != 0) {
    throw DimensionError(fmt::format("crossbar width {} is not a multiple of {} slices", n,
                                     FixedPointCodec::kSlices));
  }
  if (input.size() != n) {
    throw DimensionError(fmt::format("mvm input length {} != {}", input.size(), n));
  }
  const std::size_t groups = n / FixedPointCodec::kSlices;
  std::vector<double> out(groups, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < groups; ++g) {
      SliceVector s{};
      for (int k = 0; k < FixedPointCodec::kSlices; ++k) {
        s[k] = xbar.cell(r, g * FixedPointCodec::kSlices + k);
      }
      out[g] += input[r] * decode(s, codec, clip);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

WeightArray::WeightArray(std::size_t rows, std::size_t cols, std::size_t n,
                         std::vector<FaultMap> faults, int first_id)
    : rows_(rows), cols_(cols), n_(n) {
  if (n == 0 || n % FixedPointCodec::kSlices != 0) {
    throw ConfigError(fmt::format("weight crossbar size {} must be a positive multiple of {}",
                                  n, FixedPointCodec::kSlices));
  }
  if (rows == 0 || cols == 0) throw DimensionError("empty weight matrix");
  col_tiles_ = col_tiles(cols, n);
  const std::size_t count = row_tiles(rows, n) * col_tiles_;
  if (!faults.empty() && faults.size() != count) {
    throw DimensionError(
        fmt::format("weight array needs {} fault maps, got {}", count, faults.size()));
  }
  xbars_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (faults.empty()) {
      xbars_.emplace_back(first_id + static_cast<int>(i), n, CrossbarMode::Weight);
    } else {
      if (faults[i].size() != n) throw DimensionError("fault map size mismatch");
      xbars_.emplace_back(CrossbarMode::Weight, std::move(faults[i]));
    }
  }
  placement_.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) placement_[j] = static_cast<std::uint32_t>(j);
}

std::size_t WeightArray::row_tiles(std::size_t rows, std::size_t n) { return (rows + n - 1) / n; }

std::size_t WeightArray::col_tiles(std::size_t cols, std::size_t n) {
  return (cols * FixedPointCodec::kSlices + n - 1) / n;
}

std::vector<FaultMap> WeightArray::fault_maps() const {
  std::vector<FaultMap> out;
  out.reserve(xbars_.size());
  for (const auto& x : xbars_) out.push_back(x.faults());
  return out;
}

void WeightArray::set_faults(std::span<const FaultMap> faults) {
  if (faults.size() != xbars_.size()) throw DimensionError("fault map count mismatch");
  for (std::size_t i = 0; i < faults.size(); ++i) xbars_[i].set_faults(faults[i]);
}

void WeightArray::set_placement(std::vector<std::uint32_t> placement) {
  if (placement.size() != cols_) throw DimensionError("placement length mismatch");
  std::vector<bool> seen(cols_, false);
  for (const auto p : placement) {
    if (p >= cols_ || seen[p]) throw ConfigError("placement is not a permutation");
    seen[p] = true;
  }
  placement_ = std::move(placement);
}

std::size_t WeightArray::tile_index(std::size_t phys_row, std::size_t phys_col) const {
  return (phys_row / n_) * col_tiles_ + phys_col / n_;
}

CellFault WeightArray::fault_at(std::size_t row, std::size_t group, int slice) const {
  const std::size_t pc = group * FixedPointCodec::kSlices + static_cast<std::size_t>(slice);
  return xbars_[tile_index(row, pc)].faults().at(row % n_, pc % n_);
}

void WeightArray::write(std::span<const double> weights, const FixedPointCodec& codec,
                        bool clip_on_write) {
  if (weights.size() != rows_ * cols_) {
    throw DimensionError(fmt::format("weight array expects {} values, got {}", rows_ * cols_,
                                     weights.size()));
  }
  std::vector<std::vector<std::uint8_t>> data(xbars_.size(),
                                              std::vector<std::uint8_t>(n_ * n_, 0));
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols_; ++j) {
      double w = weights[r * cols_ + j];
      if (clip_on_write) w = clip(w, codec.clip_threshold);
      const SliceVector s = encode(w, codec);
      const std::size_t base = placement_[j] * FixedPointCodec::kSlices;
      for (int k = 0; k < FixedPointCodec::kSlices; ++k) {
        const std::size_t pc = base + static_cast<std::size_t>(k);
        data[tile_index(r, pc)][(r % n_) * n_ + pc % n_] = s[k];
      }
    }
  }
  for (std::size_t i = 0; i < xbars_.size(); ++i) xbars_[i].write(data[i]);
}

SliceVector WeightArray::read_slices(std::size_t row, std::size_t group) const {
  SliceVector s{};
  for (int k = 0; k < FixedPointCodec::kSlices; ++k) {
    const std::size_t pc = group * FixedPointCodec::kSlices + static_cast<std::size_t>(k);
    s[k] = xbars_[tile_index(row, pc)].cell(row % n_, pc % n_);
  }
  return s;
}

std::vector<double> WeightArray::effective(const FixedPointCodec& codec, bool clip) const {
  std::vector<double> out(rows_ * cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols_; ++j) {
      out[r * cols_ + j] = decode(read_slices(r, placement_[j]), codec, clip);
    }
  }
  return out;
}

std::vector<double> WeightArray::mvm(std::span<const double> input, const FixedPointCodec& codec,
                                     bool clip) const {
  if (input.size() != rows_) {
    throw DimensionError(fmt::format("mvm input length {} != {}", input.size(), rows_));
  }
  const auto w = effective(codec, clip);
  std::vector<double> out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols_; ++j) out[j] += input[r] * w[r * cols_ + j];
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_fault_history_header(std::ostream& out) { out << "crossbar_id,row,col,type,epoch\n"; }

void write_fault_history_row(std::ostream& out, const FaultMap& map, int epoch) {
  for (std::size_t r = 0; r < map.size(); ++r) {
    for (std::size_t c = 0; c < map.size(); ++c) {
      const CellFault f = map.at(r, c);
      if (f == CellFault::None) continue;
      out << map.crossbar_id() << ',' << r << ',' << c << ','
          << (f == CellFault::SA0 ? "SA0" : "SA1") << ',' << epoch << '\n';
    }
  }
}

void write_fault_csv(std::ostream& out, std::span<const FaultMap> maps) {
  const std::size_t n = maps.empty() ? 0 : maps.front().size();
  out << "# crossbars=" << maps.size() << " n=" << n << '\n';
  out << "crossbar_id,row,col,type\n";
  for (const auto& map : maps) {
    for (std::size_t r = 0; r < map.size(); ++r) {
      for (std::size_t c = 0; c < map.size(); ++c) {
        const CellFault f = map.at(r, c);
        if (f == CellFault::None) continue;
        out << map.crossbar_id() << ',' << r << ',' << c << ','
            << (f == CellFault::SA0 ? "SA0" : "SA1") << '\n';
      }
    }
  }
}

namespace {

struct ParsedFault {
  std::size_t id, row, col;
  CellFault type;
};

std::size_t parse_index(const std::string& field, std::size_t line, const char* name) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(field, &pos);
    if (pos != field.size() || v < 0) throw std::invalid_argument(field);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("fault csv line {}: invalid {} '{}'", line, name, field));
  }
}

}  // namespace

std::vector<FaultMap> read_fault_csv(std::istream& in, std::optional<std::size_t> n,
                                     std::optional<std::size_t> crossbars) {
  std::vector<ParsedFault> faults;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto value = parse_index(tok.substr(eq + 1), lineno, key.c_str());
        if (key == "crossbars" && !crossbars) crossbars = value;
        if (key == "n" && !n) n = value;
      }
      continue;
    }
    if (!header_seen && line.rfind("crossbar_id", 0) == 0) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4 && fields.size() != 5) {
      throw ConfigError(fmt::format("fault csv line {}: expected 4 or 5 fields", lineno));
    }
    CellFault type;
    if (fields[3] == "SA0") {
      type = CellFault::SA0;
    } else if (fields[3] == "SA1") {
      type = CellFault::SA1;
    } else {
      throw ConfigError(fmt::format("fault csv line {}: unknown type '{}'", lineno, fields[3]));
    }
    faults.push_back({parse_index(fields[0], lineno, "crossbar_id"),
                      parse_index(fields[1], lineno, "row"), parse_index(fields[2], lineno, "col"),
                      type});
  }
  if (!n) throw ConfigError("fault csv: crossbar size unknown (no metadata line and no n given)");
  std::size_t count = crossbars.value_or(0);
  for (const auto& pf : faults) count = std::max(count, pf.id + 1);
  std::vector<FaultMap> maps;
  maps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) maps.emplace_back(static_cast<int>(i), *n);
  for (const auto& pf : faults) maps[pf.id].add(pf.row, pf.col, pf.type);
  return maps;
}

void dump_cells_csv(std::ostream& out, const Crossbar& xbar) {
  for (std::size_t r = 0; r < xbar.size(); ++r) {
    for (std::size_t c = 0; c < xbar.size(); ++c) {
      if (c) out << ',';
      out << static_cast<int>(xbar.cell(r, c));
    }
    out << '\n';
  }
}

}  // namespace fare
