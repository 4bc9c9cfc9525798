#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace rfattn {

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based random stream. A draw is a pure function of
/// (seed, stream_id, counter), so streams never share state: copies replay,
/// forks are independent, and results do not depend on which thread draws.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_(stream_id) {
    key_ = detail::mix64(detail::mix64(seed_ + detail::kGolden) ^
                         detail::mix64(stream_ ^ 0x5851f42d4c957f2dULL));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  /// Derived substream at position zero; independent of the parent's position.
  RngStream fork(std::uint64_t label) const {
    return RngStream(seed_, detail::mix64(stream_ + detail::kGolden) ^ label);
  }

  std::uint64_t next_u64() { return detail::mix64(key_ + (counter_++) * detail::kGolden); }

  /// Uniform in [0,1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0,1]; safe as a log() argument.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_gaussian() {
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unbiased integer in [0, n) via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::domain_error("next_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v >= threshold) return v % n;
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// n i.i.d. standard-normal samples.
inline std::vector<double> gaussian(RngStream& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("gaussian: empty request");
  std::vector<double> out(n);
  for (auto& v : out) v = rng.next_gaussian();
  return out;
}

/// i.i.d. +-1 entries with equal probability.
inline std::vector<double> rademacher(RngStream& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = (rng.next_u64() & 1u) ? 1.0 : -1.0;
  return out;
}

/// Fisher-Yates-uniform permutation of 0..d-1.
inline std::vector<std::size_t> random_permutation(RngStream& rng, std::size_t d) {
  std::vector<std::size_t> perm(d);
  for (std::size_t i = 0; i < d; ++i) perm[i] = i;
  for (std::size_t i = d; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

/// One chi-distributed sample: Euclidean norm of `dof` standard normals.
inline double chi_sample(RngStream& rng, std::size_t dof) {
  if (dof == 0) throw std::domain_error("chi_sample: dof must be >= 1");
  double sq = 0.0;
  for (std::size_t i = 0; i < dof; ++i) {
    const double g = rng.next_gaussian();
    sq += g * g;
  }
  return std::sqrt(sq);
}

}  // namespace rfattn
