// Counter-based random streams. A stream is addressed by (seed, stream id);
// draw n is a pure function of (seed, stream id, n), so parallel workers can
// derive independent reproducible streams with split().
#pragma once

#include <cstdint>
#include <limits>

namespace kpsign {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr RandomStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return splitmix64(key_ + 0xD1B54A32D192ED03ull * ++counter_);
  }

  /// Child stream; independent of how many draws this stream has made.
  constexpr RandomStream split(std::uint64_t child) const noexcept {
    return RandomStream(key_, child);
  }

  /// Uniform double in [0, 1).
  constexpr double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi]; returns lo when the interval is degenerate.
  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace kpsign
