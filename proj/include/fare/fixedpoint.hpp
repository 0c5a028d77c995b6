#pragma once

#include <array>
#include <cstdint>

namespace fare {

/// Signed fixed-point format stored as a 16-bit two's-complement word that is
/// bit-sliced across eight 2-bit cells. The default Q4.12 layout covers
/// [-8, 8) with a resolution of 2^-12.
struct FixedPointCodec {
  static constexpr int kTotalBits = 16;
  static constexpr int kBitsPerCell = 2;
  static constexpr int kSlices = kTotalBits / kBitsPerCell;
  static constexpr std::uint8_t kCellMax = (1u << kBitsPerCell) - 1;

  int frac_bits = 12;
  double clip_threshold = 1.0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;

  double step() const;
  double min_value() const;
  double max_value() const;
};

/// Cell values of one weight, least-significant slice first.
using SliceVector = std::array<std::uint8_t, FixedPointCodec::kSlices>;

/// Saturating quantization to the raw 16-bit word (nearest, ties away from zero).
std::int16_t quantize(double value, const FixedPointCodec& codec);

SliceVector split_word(std::uint16_t word);
std::uint16_t join_slices(const SliceVector& slices);

SliceVector encode(double value, const FixedPointCodec& codec);

/// Shift-and-add reconstruction. With `clip` set the result saturates to
/// [-tau, tau], mirroring the comparator/mux on the read path.
double decode(const SliceVector& slices, const FixedPointCodec& codec, bool clip);

double clip(double value, double tau);

}  // namespace fare
