#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fairrec {

// Derives an independent seed for a named RNG stream so that one run seed
// can drive group assignment, splitting, init and training without overlap.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1), top 53 bits of the generator output.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline int uniform_below(std::mt19937_64& g, int n) {
  return std::min(n - 1, static_cast<int>(uniform01(g) * n));
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller, one draw per call.
inline double normal01(std::mt19937_64& g) {
  double u1 = uniform01(g);
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.28318530717958647692528676655900577 * u2);
}

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& g) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::swap(v[static_cast<std::size_t>(i)],
              v[static_cast<std::size_t>(uniform_below(g, i + 1))]);
  }
}

}  // namespace fairrec
