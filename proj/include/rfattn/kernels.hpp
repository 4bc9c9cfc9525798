#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "rfattn/matrix.hpp"

namespace rfattn {

/// exp(-||x-y||^2 / (2 sigma^2)).
inline double rbf_kernel(std::span<const double> x, std::span<const double> y,
                         double sigma = 1.0) {
  if (x.size() != y.size()) throw shape_error("rbf_kernel: length mismatch");
  if (!(sigma > 0.0)) throw std::domain_error("rbf_kernel: sigma must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    sq += diff * diff;
  }
  return std::exp(-sq / (2.0 * sigma * sigma));
}

/// exp(x.y / sqrt(d_k)), the kernel realized by scaled dot-product attention.
inline double softmax_kernel(std::span<const double> x, std::span<const double> y,
                             std::size_t key_dim) {
  if (x.size() != y.size()) throw shape_error("softmax_kernel: length mismatch");
  if (key_dim < 1) throw std::domain_error("softmax_kernel: key_dim must be >= 1");
  return std::exp(dot(x, y) / std::sqrt(static_cast<double>(key_dim)));
}

}  // namespace rfattn
