#pragma once

#include <cstdint>

namespace shiftband::rng {

// Counter-based deterministic generator (splitmix64 finalizer).
// Every draw is a pure function of (key, counter), so draws can be taken
// lazily or out of order without changing their values. Streams for
// different purposes are derived from (seed, purpose, index) and are
// statistically independent.

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// The index-th output of the stream identified by key.
inline std::uint64_t at(std::uint64_t key, std::uint64_t index) {
  return mix64(key + (index + 1) * kGamma);
}

inline double to_uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
}

// Stream purposes. Keeping the constants in one place guarantees the
// environment-noise and algorithm streams never collide.
enum Purpose : std::uint64_t {
  kEnvNoise = 1,
  kPolicy = 2,
  kSchedule = 3,
  kHarness = 4,
  kGenerator = 5,
};

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t purpose,
                                std::uint64_t index = 0) {
  return mix64(mix64(seed + kGamma * (purpose + 1)) + kGamma * (index + 1));
}

class Stream {
 public:
  Stream() = default;
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0)
      : key_(derive_key(seed, purpose, index)) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return at(key_, counter_++); }

  double next_uniform01() { return to_uniform01(next_u64()); }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform01();
  }

  bool next_bernoulli(double p) { return next_uniform01() < p; }

  // Uniform index in [0, n). Uses the high-bits multiply; the bias is
  // below n / 2^64 and irrelevant at desk scale.
  std::int64_t next_index(std::int64_t n) {
    return static_cast<std::int64_t>(
        (static_cast<unsigned __int128>(next_u64()) *
         static_cast<unsigned __int128>(n)) >>
        64);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace shiftband::rng
