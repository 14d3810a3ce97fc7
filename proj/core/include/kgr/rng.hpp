#pragma once

#include <cassert>
#include <cstdint>
#include <random>

namespace kgr {

// splitmix64 finalizer. Derives independent, reproducible seeds for
// sub-streams (per-epoch negative sampling, init, evaluation) from one
// master seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with portable draws. std::uniform_*_distribution output is
// implementation-defined, so bounded integers use rejection sampling and
// reals come straight from the top 53 bits. Identical sequences on every
// platform for a given seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // uniform in [0, bound), unbiased
  std::uint64_t next_below(std::uint64_t bound) {
    assert(bound > 0);
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % bound;
    }
  }

  int next_int(int bound) { return static_cast<int>(next_below(static_cast<std::uint64_t>(bound))); }

  // uniform in [0, 1)
  double next_real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double next_real(double lo, double hi) { return lo + (hi - lo) * next_real(); }

  bool next_bool() { return (gen_() & 1ULL) != 0; }

private:
  std::mt19937_64 gen_;
};

}  // namespace kgr
