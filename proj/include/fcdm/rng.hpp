#pragma once

#include <cstdint>
#include <random>

namespace fcdm {

/// Deterministic generator used everywhere randomness is needed.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not, so the conversions below
/// are written out explicitly:
///   uniform()   = (next() >> 11) * 2^-53, in [0, 1)
///   below(n)    = high 64 bits of next() * n (Lemire multiply-shift)
///   normal()    = Box-Muller on two uniform() draws, no caching
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer. Derives independent child seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace fcdm
