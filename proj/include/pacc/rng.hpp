#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pacc {

// FNV-1a 64 over bytes. Used wherever a stable cross-platform hash is
// needed (std::hash is implementation-defined).
inline uint64_t stable_hash(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Counter-based deterministic generator (splitmix64 over seed + counter).
// Identical seeds produce identical draw sequences on every platform, which
// is what makes dropout masks, weight init, splits and augmentation
// reproducible byte-for-byte.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() {
    uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Derives an independent substream; forked streams never share draws with
  // the parent regardless of how many values either consumes.
  RngStream fork(uint64_t stream_id) const {
    uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull + stream_id * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngStream(z ^ (z >> 31));
  }

  // Deterministic Fisher-Yates; std::shuffle is implementation-defined and
  // would break byte-identical split plans across standard libraries.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace pacc
