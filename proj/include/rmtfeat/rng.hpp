#pragma once

#include <cstdint>
#include <random>

namespace rmtfeat {

// Portable seeded generator: std::mt19937_64 produces the same sequence on
// every conforming implementation, but the std distributions do not, so the
// uniform and normal transforms are done here.
//
// Streams: derive_seed(master, a, b, ...) mixes the indices through
// SplitMix64, so every window/fold/tree gets its own generator and results
// do not depend on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_normal_{0.0};
  bool has_cached_{false};
};

std::uint64_t splitmix64(std::uint64_t x);

template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t master, Ids... ids) {
  std::uint64_t s = splitmix64(master);
  ((s = splitmix64(s ^ splitmix64(static_cast<std::uint64_t>(ids) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

// Fisher-Yates shuffle driven by Rng::below.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace rmtfeat
