#include "fare/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fare/error.hpp"

namespace fare {

void FixedPointCodec::validate() const {
  if (frac_bits < 0 || frac_bits >= kTotalBits) {
    throw ConfigError("codec.frac_bits must lie in [0, 15]");
  }
  if (!(clip_threshold > 0.0) || !std::isfinite(clip_threshold)) {
    throw ConfigError("codec.clip_threshold must be a positive finite number");
  }
}

double FixedPointCodec::step() const { return std::ldexp(1.0, -frac_bits); }

double FixedPointCodec::min_value() const {
  return std::numeric_limits<std::int16_t>::min() * step();
}

double FixedPointCodec::max_value() const {
  return std::numeric_limits<std::int16_t>::max() * step();
}

std::int16_t quantize(double value, const FixedPointCodec& codec) {
  const double clamped = std::clamp(value, codec.min_value(), codec.max_value());
  // std::round already rounds half away from zero.
  const double scaled = std::round(std::ldexp(clamped, codec.frac_bits));
  const double bounded =
      std::clamp(scaled, static_cast<double>(std::numeric_limits<std::int16_t>::min()),
                 static_cast<double>(std::numeric_limits<std::int16_t>::max()));
  return static_cast<std::int16_t>(bounded);
}

SliceVector split_word(std::uint16_t word) {
  SliceVector slices{};
  for (int k = 0; k < FixedPointCodec::kSlices; ++k) {
    slices[k] = static_cast<std::uint8_t>((word >> (k * FixedPointCodec::kBitsPerCell)) &
                                          FixedPointCodec::kCellMax);
  }
  return slices;
}

std::uint16_t join_slices(const SliceVector& slices) {
  std::uint32_t word = 0;
  for (int k = FixedPointCodec::kSlices - 1; k >= 0; --k) {
    word = (word << FixedPointCodec::kBitsPerCell) | (slices[k] & FixedPointCodec::kCellMax);
  }
  return static_cast<std::uint16_t>(word);
}

SliceVector encode(double value, const FixedPointCodec& codec) {
  return split_word(static_cast<std::uint16_t>(quantize(value, codec)));
}

double decode(const SliceVector& slices, const FixedPointCodec& codec, bool clip_enabled) {
  const auto word = static_cast<std::int16_t>(join_slices(slices));
  const double value = std::ldexp(static_cast<double>(word), -codec.frac_bits);
  return clip_enabled ? clip(value, codec.clip_threshold) : value;
}

double clip(double value, double tau) {
  if (!(tau > 0.0)) {
    throw ConfigError("clip threshold must be positive");
  }
  return std::min(std::max(value, -tau), tau);
}

}  // namespace fare
