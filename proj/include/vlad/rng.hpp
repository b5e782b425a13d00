#pragma once

#include <cstdint>
#include <vector>

namespace vlad {

/// SplitMix64 with the standard constants. Every random draw in the project
/// goes through this generator so datasets and models are bit-reproducible.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += kGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) using the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n); n must be positive. Plain modulo reduction.
  std::uint64_t index(std::uint64_t n) noexcept { return next() % n; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Independent sub-stream for item `index` of a seeded collection: the
/// state starts at seed + (index + 1) * gamma, then one draw decorrelates it.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) noexcept {
  SplitMix64 base(seed + (index + 1) * SplitMix64::kGamma);
  return SplitMix64(base.next());
}

/// Fisher-Yates shuffle driven by the given stream (j = next() % (i + 1)).
template <class T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace vlad
