#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pcc {

// Counter-based 64-bit generator ("pcc-splitmix64"). Output i for seed s is
//
//   mix64(s + i * 0x9E3779B97F4A7C15)        (i = 1, 2, ...)
//
// where mix64 is the splitmix64 finalizer. The stream is a pure function of
// (seed, counter), so any language can reproduce it from this definition.
class Rng {
public:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit Rng(uint64_t seed) : seed_(seed) {}

  static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  // Derives an independent stream seed from a parent seed and a label
  // (FNV-1a over the label bytes, folded into the seed through mix64).
  static uint64_t derive(uint64_t seed, std::string_view label) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return mix64(seed ^ mix64(h));
  }

  static uint64_t derive(uint64_t seed, uint64_t index) {
    return mix64(seed ^ mix64(index + 0x9E3779B97F4A7C15ull));
  }

  uint64_t next_u64() {
    counter_ += 1;
    return mix64(seed_ + counter_ * kGamma);
  }

  // Uniform in [0, 1), 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n) without modulo bias (rejection sampling).
  uint64_t next_below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int next_int(int lo, int hi_exclusive) {
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi_exclusive - lo)));
  }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double v = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u));
    const double angle = 6.283185307179586476925286766559 * v;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double next_normal(double mean, double stddev) { return mean + stddev * next_normal(); }

private:
  uint64_t seed_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pcc
