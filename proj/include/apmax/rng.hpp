#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace apmax {

// Every random decision in the library is a pure function of
// (seed, stream, round). Streams keep independent consumers (feature
// generation, batch sampling, ...) from aliasing each other.
enum class Stream : std::uint64_t {
  synth_features = 1,
  synth_direction = 2,
  synth_noise = 3,
  drop_positives = 4,
  split_shuffle = 5,
  positive_batch = 6,
  inner_batch = 7,
  tracker_init = 8,
  oracle = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream,
                                std::uint64_t round = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  s = splitmix64(s ^ round);
  return std::mt19937_64(s);
}

// Unbiased draw from [0, n). Hand-rolled so results do not depend on the
// standard library's distribution internals.
inline std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("draw_below: empty range");
  const std::uint64_t all = ~std::uint64_t{0};
  const std::uint64_t limit = all - all % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Uniform double in [0, 1).
inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, one value per call.
inline double draw_normal(std::mt19937_64& rng) {
  double u1 = draw_unit(rng);
  while (u1 == 0.0) u1 = draw_unit(rng);
  const double u2 = draw_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline void shuffle_indices(std::mt19937_64& rng,
                            std::vector<std::size_t>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(draw_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// k distinct values from [0, n), partial Fisher-Yates; order is random.
inline std::vector<std::size_t> sample_without_replacement(
    std::mt19937_64& rng, std::size_t k, std::size_t n) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(draw_below(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

inline std::vector<std::size_t> sample_with_replacement(std::mt19937_64& rng,
                                                        std::size_t k,
                                                        std::size_t n) {
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i)
    out[i] = static_cast<std::size_t>(draw_below(rng, n));
  return out;
}

}  // namespace apmax
