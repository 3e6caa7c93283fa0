#pragma once

#include <cstdint>
#include <random>

namespace lofpc {

/// splitmix64 finalizer. Used to turn (seed, index) pairs into well-mixed
/// engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

using Engine = std::mt19937_64;

/// A named position in a tree of random streams. Two streams with the same
/// (seed, index) produce the same draws no matter where or when they run,
/// which is what makes parallel results independent of the worker count.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  RngStream() = default;
  explicit RngStream(std::uint64_t s, std::uint64_t i = 0) : seed(s), index(i) {}

  /// Independent child stream number k.
  RngStream child(std::uint64_t k) const {
    return RngStream(seed, splitmix64(index ^ splitmix64(k + 0x632BE59BD9B4E019ULL)));
  }

  Engine engine() const { return Engine(splitmix64(seed ^ splitmix64(index))); }

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

}  // namespace lofpc
