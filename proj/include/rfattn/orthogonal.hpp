#pragma once

#include <Eigen/Dense>

#include "rfattn/matrix.hpp"
#include "rfattn/rng.hpp"

namespace rfattn {

/// Haar-uniform random orthogonal d x d matrix: QR of a standard Gaussian
/// matrix with each column of Q sign-corrected by the sign of the matching
/// diagonal entry of R. Without the correction the distribution is not Haar.
inline DenseMatrix haar_orthogonal(RngStream& rng, std::size_t d) {
  Eigen::MatrixXd g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = rng.next_gaussian();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);

  DenseMatrix out(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = q(i, j);
  return out;
}

}  // namespace rfattn
