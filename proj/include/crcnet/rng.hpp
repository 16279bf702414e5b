#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace crcnet {

// Counter-based pseudo-random generator built on the SplitMix64 output
// function.  The i-th draw of a stream is a pure function of (key, i):
//
//   value(key, i) = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)
//
// with mix64 the finalizer
//
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27;  z *= 0x94D049BB133111EB;
//   z ^= z >> 31;
//
// All constants are fixed here so any implementation, in any language,
// reproduces the same stream bit for bit.  Floating-point conversions are
// specified exactly:
//   uniform  u = (value >> 11) * 2^-53            in [0, 1)
//   exponential(rate) = -log1p(-u) / rate
//   normal: Box-Muller on a uniform pair (u1, u2),
//           r = sqrt(-2 log(1-u1)), z = (r cos(2*pi*u2), r sin(2*pi*u2))
// next_normal() consumes exactly one pair and discards the second value, so
// draw counts stay position-independent.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t at(std::uint64_t i) const { return mix64(key_ + (i + 1) * kGamma); }

  std::uint64_t next_u64() { return at(counter_++); }

  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_exponential(double rate) {
    return -std::log1p(-next_unit()) / rate;
  }

  std::pair<double, double> next_normal_pair() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  double next_normal() { return next_normal_pair().first; }

  // Unbiased-enough bounded draw via the multiply-shift map; deterministic
  // and reproducible from the raw 64-bit stream.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Independent stream for a sub-task; the derived key is again a pure
  // function of (key, stream id).
  CounterRng substream(std::uint64_t stream) const {
    return CounterRng(mix64(key_ ^ mix64(stream + 0x6A09E667F3BCC909ULL)));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Fisher-Yates shuffle driven by CounterRng; identical permutation for
// identical (key, counter) state.
template <typename T>
void shuffle(std::vector<T>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace crcnet
