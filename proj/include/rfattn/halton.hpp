#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/special.hpp"

namespace rfattn {

/// How many dimensions (one prime base per dimension) the generator supports.
inline constexpr std::size_t kMaxHaltonDims = 4096;

/// First `count` primes, sieved once and cached.
inline const std::vector<std::uint32_t>& first_primes(std::size_t count) {
  if (count > kMaxHaltonDims)
    throw capacity_error("first_primes: prime table capped at 4096 entries");
  static const std::vector<std::uint32_t> table = [] {
    // The 4096th prime is 38873.
    constexpr std::uint32_t limit = 38874;
    std::vector<bool> composite(limit, false);
    std::vector<std::uint32_t> primes;
    primes.reserve(kMaxHaltonDims);
    for (std::uint32_t i = 2; i < limit; ++i) {
      if (composite[i]) continue;
      primes.push_back(i);
      for (std::uint64_t j = static_cast<std::uint64_t>(i) * i; j < limit; j += i)
        composite[j] = true;
    }
    return primes;
  }();
  return table;
}

/// Radical inverse of `index` in the given base: the Halton coordinate.
inline double halton(std::uint64_t index, std::uint32_t base) {
  if (base < 2) throw std::domain_error("halton: base must be >= 2");
  if (index == 0) throw std::domain_error("halton: index must be >= 1");
  double inv_digit = 1.0;
  double value = 0.0;
  const double inv_base = 1.0 / base;
  while (index > 0) {
    inv_digit *= inv_base;
    value += inv_digit * static_cast<double>(index % base);
    index /= base;
  }
  return value;
}

/// The `index`-th point of the d-dimensional Halton sequence, bases the
/// first d primes.
inline std::vector<double> halton_point(std::uint64_t index, std::size_t dim) {
  const auto& primes = first_primes(dim);
  if (dim > primes.size())
    throw capacity_error("halton_point: dimension exceeds prime table");
  std::vector<double> point(dim);
  for (std::size_t j = 0; j < dim; ++j) point[j] = halton(index, primes[j]);
  return point;
}

/// Halton point pushed through the inverse normal CDF, coordinate-wise.
inline std::vector<double> gaussian_halton_point(std::uint64_t index, std::size_t dim) {
  auto point = halton_point(index, dim);
  for (auto& t : point) t = inverse_normal_cdf(t);
  return point;
}

}  // namespace rfattn
