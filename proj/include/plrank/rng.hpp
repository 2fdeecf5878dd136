#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace plrank {

// 64-bit finalizer used to turn (seed, stream-id) pairs into well-spread
// engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// FNV-1a. Used to key per-banner streams off the banner id, so draws do not
// depend on file order or on how the record stream was filtered.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Deterministic random stream. Every randomized operation takes one of these
// explicitly; a given seed yields the same draw sequence on every run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  // uniform double in [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in {0, ..., n-1}; n >= 1
  int uniform_int(int n) {
    int k = static_cast<int>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  std::uint64_t next_u64() { return gen_(); }

  // independent substream of a master seed
  static Rng derive(std::uint64_t master_seed, std::uint64_t stream_id) {
    return Rng(splitmix64(master_seed ^ splitmix64(stream_id)));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace plrank
