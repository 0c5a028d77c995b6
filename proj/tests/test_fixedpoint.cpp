#include <doctest.h>

#include <random>

#include "fare/error.hpp"
#include "fare/fixedpoint.hpp"
#include "oracles.hpp"

using namespace fare;

namespace {

std::vector<int> as_vec(const SliceVector& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("encode known words") {
  const FixedPointCodec codec;
  CHECK(as_vec(encode(0.0, codec)) == std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(as_vec(encode(1.0, codec)) == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 0});
  CHECK(join_slices(encode(1.0, codec)) == 0x1000);
  CHECK(as_vec(encode(-1.0 / 4096.0, codec)) == std::vector<int>{3, 3, 3, 3, 3, 3, 3, 3});
  CHECK(join_slices(encode(-1.0 / 4096.0, codec)) == 0xFFFF);
}

TEST_CASE("encode matches integer oracle on random values") {
  const FixedPointCodec codec;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-9.0, 9.0);
  for (int i = 0; i < 20000; ++i) {
    const double v = dist(rng);
    CHECK(as_vec(encode(v, codec)) == oracle::slices_of(oracle::to_fixed(v)));
  }
}

TEST_CASE("rounding ties away from zero") {
  const FixedPointCodec codec;
  const double half = 0.5 / 4096.0;
  CHECK(quantize(half, codec) == 1);
  CHECK(quantize(-half, codec) == -1);
  CHECK(quantize(3 * half, codec) == 2);
  CHECK(quantize(-3 * half, codec) == -2);
}

TEST_CASE("encode saturates at the representable range") {
  const FixedPointCodec codec;
  CHECK(quantize(100.0, codec) == 32767);
  CHECK(quantize(-100.0, codec) == -32768);
  CHECK(decode(encode(-8.0, codec), codec, false) == -8.0);
  CHECK(decode(encode(9.0, codec), codec, false) == doctest::Approx(8.0 - 1.0 / 4096.0));
}

TEST_CASE("round trip on grid and quantization error") {
  const FixedPointCodec codec;
  for (std::int32_t q = -32768; q <= 32767; q += 7) {
    const double v = q / 4096.0;
    CHECK(decode(encode(v, codec), codec, false) == v);
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-7.99, 7.99);
  for (int i = 0; i < 5000; ++i) {
    const double v = dist(rng);
    CHECK(std::abs(decode(encode(v, codec), codec, false) - v) <= 1.0 / 4096.0);
  }
}

TEST_CASE("decode agrees with the integer oracle for arbitrary slices") {
  const FixedPointCodec codec;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cell(0, 3);
  for (int i = 0; i < 5000; ++i) {
    SliceVector s;
    std::vector<int> v;
    for (auto& x : s) {
      x = static_cast<std::uint8_t>(cell(rng));
      v.push_back(x);
    }
    CHECK(decode(s, codec, false) == oracle::value_of(v));
    const double clipped = decode(s, codec, true);
    CHECK(clipped >= -1.0);
    CHECK(clipped <= 1.0);
  }
}

TEST_CASE("encode is monotone") {
  const FixedPointCodec codec;
  double prev = -9.0;
  for (double v = -9.0; v < 9.0; v += 0.0013) {
    CHECK(decode(encode(v, codec), codec, false) >= decode(encode(prev, codec), codec, false));
    prev = v;
  }
}

TEST_CASE("MSB SA1 explosion and clipping") {
  const FixedPointCodec codec;
  auto s = encode(1.0, codec);
  s[7] = 3;
  CHECK(join_slices(s) == 0xD000);
  CHECK(decode(s, codec, false) == -3.0);
  CHECK(decode(s, codec, true) == -1.0);

  // Explosion bound: a zero top slice forced to 3 moves the value by >= 2^(16-2-12).
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-0.9, 0.9);
  for (int i = 0; i < 2000; ++i) {
    const double v = dist(rng);
    auto w = encode(v, codec);
    if (w[7] != 0) continue;
    const double before = decode(w, codec, false);
    w[7] = 3;
    CHECK(std::abs(decode(w, codec, false) - before) >= 4.0);
    CHECK(std::abs(decode(w, codec, true)) <= codec.clip_threshold);
  }
}

TEST_CASE("clip") {
  CHECK(clip(1.5, 1.0) == 1.0);
  CHECK(clip(-0.3, 1.0) == -0.3);
  CHECK(clip(-3.0, 1.0) == -1.0);
  CHECK_THROWS_AS(clip(0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(clip(0.5, -1.0), ConfigError);
}

TEST_CASE("codec validation") {
  FixedPointCodec c;
  c.clip_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.clip_threshold = 1.0;
  c.frac_bits = 16;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.frac_bits = 8;
  CHECK_NOTHROW(c.validate());
  CHECK(decode(encode(1.5, c), c, false) == 1.5);
}
