#pragma once

// Seeded random streams. Every consumer gets its own named sub-stream derived
// from the experiment seed, so adding a consumer never shifts another's draws.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace nlrl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ fnv1a(stream)) + index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  // Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nlrl
