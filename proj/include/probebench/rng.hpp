#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace probebench {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Derives an independent stream seed from a base seed, a stream label and an
// index (e.g. fold number). Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) noexcept;

// Portable random source. std::mt19937_64 output is fixed by the standard;
// every distribution on top of it is implemented here so results do not
// depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in (0, 1].
  double uniform_open_closed() { return 1.0 - uniform(); }
  // Unbiased integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  // Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace probebench
