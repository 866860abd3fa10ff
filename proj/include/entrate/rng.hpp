#pragma once

#include <cstdint>
#include <string_view>

namespace entrate {

inline constexpr std::string_view kRngName = "splitmix64-counter/box-muller";
inline constexpr int kRngVersion = 1;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based uniform in (0, 1]: a pure function of (seed, counter).
double uniform_at(std::uint64_t seed, std::uint64_t counter) noexcept;

/// Standard normal variates. Variate k is built by Box-Muller from uniforms
/// 2*(k/2) and 2*(k/2)+1, so the stream position is a pure function of k.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) noexcept : seed_(seed) {}

  double next() noexcept;
  std::uint64_t position() const noexcept { return index_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_ = 0;
  double cached_ = 0.0;
};

}  // namespace entrate
