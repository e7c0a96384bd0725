#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace patchdrift {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A stream is addressed by (key, stream id); draws depend only on the
// block counter, so replicates can run on any thread in any order and
// still produce identical sequences.
class Philox4x32 {
 public:
  Philox4x32(std::uint64_t key, std::uint64_t stream)
      : key0_(static_cast<std::uint32_t>(key)),
        key1_(static_cast<std::uint32_t>(key >> 32)),
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)),
        block_(0) {}

  std::array<std::uint32_t, 4> next_block() {
    std::uint32_t c0 = static_cast<std::uint32_t>(block_);
    std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
    ++block_;
    std::uint32_t x0 = c0, x1 = c1, x2 = stream_lo_, x3 = stream_hi_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t lo0, hi0, lo1, hi1;
      mulhilo(kMulA, x0, lo0, hi0);
      mulhilo(kMulB, x2, lo1, hi1);
      std::uint32_t y0 = hi1 ^ x1 ^ k0;
      std::uint32_t y1 = lo1;
      std::uint32_t y2 = hi0 ^ x3 ^ k1;
      std::uint32_t y3 = lo0;
      x0 = y0;
      x1 = y1;
      x2 = y2;
      x3 = y3;
      k0 += kWeylA;
      k1 += kWeylB;
    }
    return {x0, x1, x2, x3};
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
  }

  std::uint32_t key0_, key1_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t block_;
};

// Standard normal draws via Box-Muller on Philox output. One 128-bit
// block yields two 53-bit uniforms and hence two normals.
class NormalStream {
 public:
  NormalStream(std::uint64_t key, std::uint64_t stream)
      : gen_(key, stream), cached_(false), cache_(0.0) {}

  double next() {
    if (cached_) {
      cached_ = false;
      return cache_;
    }
    auto b = gen_.next_block();
    double u1 = to_open_unit(b[0], b[1]);
    double u2 = to_open_unit(b[2], b[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * kPi * u2;
    cache_ = r * std::sin(angle);
    cached_ = true;
    return r * std::cos(angle);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  // 53-bit mantissa, offset by half an ulp so the result lies in (0,1).
  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t m = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(m) + 0.5) * 0x1.0p-53;
  }

  Philox4x32 gen_;
  bool cached_;
  double cache_;
};

}  // namespace patchdrift
