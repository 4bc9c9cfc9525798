#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rfattn/errors.hpp"

namespace rfattn {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place fast Walsh-Hadamard transform with the orthonormal (1/sqrt(d))
/// scaling, so applying it twice is the identity. O(d log d).
inline void fwht_normalized_inplace(std::span<double> x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) throw shape_error("fwht: length must be a power of two");
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& v : x) v *= scale;
}

inline std::vector<double> fwht_normalized(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  fwht_normalized_inplace(out);
  return out;
}

}  // namespace rfattn
