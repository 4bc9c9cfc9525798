#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/fwht.hpp"
#include "rfattn/halton.hpp"
#include "rfattn/matrix.hpp"
#include "rfattn/orthogonal.hpp"
#include "rfattn/rng.hpp"

namespace rfattn {

enum class WeightFamily {
  kBase,
  kOrf,
  kSorf,
  kQmc,
  kMm,
  kSgq,
  kFastFoodFixed,
  kFastFoodLearnable,
};

inline std::string to_token(WeightFamily f) {
  switch (f) {
    case WeightFamily::kBase: return "base";
    case WeightFamily::kOrf: return "orf";
    case WeightFamily::kSorf: return "sorf";
    case WeightFamily::kQmc: return "qmc";
    case WeightFamily::kMm: return "mm";
    case WeightFamily::kSgq: return "sgq";
    case WeightFamily::kFastFoodFixed: return "fastfood_f";
    case WeightFamily::kFastFoodLearnable: return "fastfood_l";
  }
  throw validation_error("unknown weight family");
}

inline WeightFamily weight_family_from_token(const std::string& token) {
  if (token == "base") return WeightFamily::kBase;
  if (token == "orf") return WeightFamily::kOrf;
  if (token == "sorf") return WeightFamily::kSorf;
  if (token == "qmc") return WeightFamily::kQmc;
  if (token == "mm") return WeightFamily::kMm;
  if (token == "sgq") return WeightFamily::kSgq;
  if (token == "fastfood_f") return WeightFamily::kFastFoodFixed;
  if (token == "fastfood_l") return WeightFamily::kFastFoodLearnable;
  throw validation_error("unknown weight-matrix token: " + token);
}

/// Whether a family produces the same matrix for a fixed spec (no sampling
/// variance to report across rebuilds).
inline bool family_is_deterministic(WeightFamily f) {
  return f == WeightFamily::kQmc || f == WeightFamily::kMm || f == WeightFamily::kSgq;
}

inline bool family_uses_padding(WeightFamily f) {
  return f == WeightFamily::kSorf || f == WeightFamily::kFastFoodFixed ||
         f == WeightFamily::kFastFoodLearnable;
}

enum class FastFoodDiagonal { kScale, kGauss, kSign };  // S, G, B

struct WeightMatrixSpec {
  WeightFamily family = WeightFamily::kBase;
  std::size_t num_features = 0;  // s
  std::size_t dim = 0;           // d
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::vector<FastFoodDiagonal> learnable;  // FastFood learner only
};

inline void validate(const WeightMatrixSpec& spec) {
  if (spec.num_features < 1) throw validation_error("spec: num_features must be >= 1");
  if (spec.dim < 1) throw validation_error("spec: dim must be >= 1");
  if (!(spec.sigma > 0.0)) throw validation_error("spec: sigma must be positive");
  if (!spec.learnable.empty() && spec.family != WeightFamily::kFastFoodLearnable)
    throw validation_error("spec: learnable diagonals require the fastfood_l family");
}

struct FastFoodBlockParams {
  std::vector<double> scale;       // S diagonal, length d'
  std::vector<double> gauss;       // G diagonal
  std::vector<double> sign;        // B diagonal; +-1 until learned
  std::vector<std::size_t> perm;   // Pi
};

struct FastFoodParams {
  std::size_t padded_dim = 0;
  std::vector<FastFoodBlockParams> blocks;
  std::vector<FastFoodDiagonal> learnable;

  bool is_learnable(FastFoodDiagonal d) const {
    for (auto l : learnable)
      if (l == d) return true;
    return false;
  }
};

struct SorfParams {
  std::size_t padded_dim = 0;
  // Three sign-flip diagonals per block; index 0 is applied first (D3 of
  // the H D1 H D2 H D3 product).
  std::vector<std::array<std::vector<double>, 3>> blocks;
};

/// Third-degree univariate Gaussian quadrature rule behind the sparse-grid
/// family: nodes {-node, 0, node} and weights (side, center, side). Kept as
/// metadata; the feature map applies unit component weights throughout.
struct SgqConfig {
  double node = 1.7320508075688772;       // sqrt(3)
  double weight_center = 2.0 / 3.0;
  double weight_side = 1.0 / 6.0;
};

struct BuildMetadata {
  bool deterministic = false;
  bool covariance_regularized = false;
};

namespace detail {

// y = (1/sigma) * S H G Pi H B x for one padded block, orthonormal H.
inline void fastfood_block_matvec(const FastFoodBlockParams& block, double sigma,
                                  std::span<const double> x_padded,
                                  std::span<double> out) {
  const std::size_t dp = block.sign.size();
  for (std::size_t i = 0; i < dp; ++i) out[i] = block.sign[i] * x_padded[i];
  fwht_normalized_inplace(out);
  std::vector<double> permuted(dp);
  for (std::size_t i = 0; i < dp; ++i) permuted[i] = out[block.perm[i]];
  for (std::size_t i = 0; i < dp; ++i) out[i] = block.gauss[i] * permuted[i];
  fwht_normalized_inplace(out);
  const double inv_sigma = 1.0 / sigma;
  for (std::size_t i = 0; i < dp; ++i) out[i] *= block.scale[i] * inv_sigma;
}

// y = (sqrt(d')/sigma) * H D1 H D2 H D3 x for one padded block.
inline void sorf_block_matvec(const std::array<std::vector<double>, 3>& diagonals,
                              double sigma, std::span<const double> x_padded,
                              std::span<double> out) {
  const std::size_t dp = diagonals[0].size();
  for (std::size_t i = 0; i < dp; ++i) out[i] = diagonals[0][i] * x_padded[i];
  fwht_normalized_inplace(out);
  for (std::size_t i = 0; i < dp; ++i) out[i] *= diagonals[1][i];
  fwht_normalized_inplace(out);
  for (std::size_t i = 0; i < dp; ++i) out[i] *= diagonals[2][i];
  fwht_normalized_inplace(out);
  const double scale = std::sqrt(static_cast<double>(dp)) / sigma;
  for (std::size_t i = 0; i < dp; ++i) out[i] *= scale;
}

}  // namespace detail

/// A realized weight matrix: the WeightMatrixSpec it was built from,
/// explicit s x d rows, and for the Hadamard-structured families the
/// implicit fast-transform parameters whose matvec agrees with the rows.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(WeightMatrixSpec spec, DenseMatrix rows, BuildMetadata meta)
      : spec_(std::move(spec)), rows_(std::move(rows)), meta_(meta) {}

  const WeightMatrixSpec& spec() const noexcept { return spec_; }
  const DenseMatrix& rows() const noexcept { return rows_; }
  const BuildMetadata& metadata() const noexcept { return meta_; }

  std::size_t num_features() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  std::size_t padded_dim() const noexcept {
    if (fastfood_) return fastfood_->padded_dim;
    if (sorf_) return sorf_->padded_dim;
    return dim();
  }

  const std::optional<FastFoodParams>& fastfood() const noexcept { return fastfood_; }
  const std::optional<SorfParams>& sorf() const noexcept { return sorf_; }
  const std::optional<SgqConfig>& sgq() const noexcept { return sgq_; }
  bool has_implicit() const noexcept { return fastfood_ || sorf_; }

  void set_fastfood(FastFoodParams p) { fastfood_ = std::move(p); }
  void set_sorf(SorfParams p) { sorf_ = std::move(p); }
  void set_sgq(SgqConfig c) { sgq_ = c; }

  double row_squared_norm(std::size_t i) const { return squared_norm(rows_.row(i)); }

  /// W x through the fast transform when one exists, otherwise rows * x.
  std::vector<double> matvec(std::span<const double> x) const {
    if (x.size() != dim()) throw shape_error("weight matvec: length mismatch");
    if (!has_implicit()) return rfattn::matvec(rows_, x);

    const std::size_t dp = padded_dim();
    std::vector<double> x_padded(dp, 0.0);
    std::copy(x.begin(), x.end(), x_padded.begin());
    const std::size_t s = num_features();
    std::vector<double> out(s);
    std::vector<double> block_out(dp);
    const std::size_t num_blocks = (s + dp - 1) / dp;
    for (std::size_t b = 0; b < num_blocks; ++b) {
      if (fastfood_)
        detail::fastfood_block_matvec(fastfood_->blocks[b], spec_.sigma, x_padded,
                                      block_out);
      else
        detail::sorf_block_matvec(sorf_->blocks[b], spec_.sigma, x_padded, block_out);
      const std::size_t take = std::min(dp, s - b * dp);
      std::copy_n(block_out.begin(), take, out.begin() + b * dp);
    }
    return out;
  }

  std::vector<double> explicit_matvec(std::span<const double> x) const {
    return rfattn::matvec(rows_, x);
  }

 private:
  WeightMatrixSpec spec_;
  DenseMatrix rows_;
  BuildMetadata meta_;
  std::optional<FastFoodParams> fastfood_;
  std::optional<SorfParams> sorf_;
  std::optional<SgqConfig> sgq_;
};

namespace detail {

// Substream labels hung off the per-build root stream.
inline constexpr std::uint64_t kLabelGaussian = 0;
inline constexpr std::uint64_t kLabelChi = 1;
inline constexpr std::uint64_t kLabelSign = 2;
inline constexpr std::uint64_t kLabelPerm = 3;
inline constexpr std::uint64_t kLabelGaussDiag = 4;

inline RngStream block_stream(const WeightMatrixSpec& spec, std::size_t block,
                              std::uint64_t label) {
  return RngStream(spec.seed).fork(block).fork(label);
}

// Fill explicit rows for an implicit-transform matrix by pushing basis
// vectors through the block transform (column at a time).
template <typename BlockMatvec>
void fill_rows_from_blocks(DenseMatrix& rows, std::size_t padded_dim,
                           std::size_t num_blocks, BlockMatvec&& apply_block) {
  const std::size_t s = rows.rows();
  const std::size_t d = rows.cols();
  std::vector<double> basis(padded_dim, 0.0);
  std::vector<double> column(padded_dim);
  for (std::size_t j = 0; j < d; ++j) {
    basis[j] = 1.0;
    for (std::size_t b = 0; b < num_blocks; ++b) {
      apply_block(b, basis, column);
      const std::size_t take = std::min(padded_dim, s - b * padded_dim);
      for (std::size_t r = 0; r < take; ++r) rows(b * padded_dim + r, j) = column[r];
    }
    basis[j] = 0.0;
  }
}

}  // namespace detail

/// Direct sampling: rows are i.i.d. N(0, 1/sigma^2) entries. Rows are filled
/// in order so growing s with a fixed seed extends the matrix.
inline WeightMatrix build_base(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kBase)
    throw validation_error("build_base: family mismatch");
  DenseMatrix rows(spec.num_features, spec.dim);
  RngStream rng = RngStream(spec.seed).fork(detail::kLabelGaussian);
  const double inv_sigma = 1.0 / spec.sigma;
  for (std::size_t i = 0; i < spec.num_features; ++i)
    for (std::size_t j = 0; j < spec.dim; ++j)
      rows(i, j) = rng.next_gaussian() * inv_sigma;
  return WeightMatrix(spec, std::move(rows), {});
}

/// Orthogonal random features: per d x d block, chi-scaled Haar-orthogonal
/// rows; independent blocks stacked and the last truncated when s > d.
inline WeightMatrix build_orf(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kOrf)
    throw validation_error("build_orf: family mismatch");
  const std::size_t d = spec.dim;
  const std::size_t s = spec.num_features;
  DenseMatrix rows(s, d);
  const std::size_t num_blocks = (s + d - 1) / d;
  const double inv_sigma = 1.0 / spec.sigma;
  for (std::size_t b = 0; b < num_blocks; ++b) {
    RngStream q_rng = detail::block_stream(spec, b, detail::kLabelGaussian);
    RngStream chi_rng = detail::block_stream(spec, b, detail::kLabelChi);
    const DenseMatrix q = haar_orthogonal(q_rng, d);
    const std::size_t take = std::min(d, s - b * d);
    for (std::size_t r = 0; r < take; ++r) {
      const double scale = chi_sample(chi_rng, d) * inv_sigma;
      for (std::size_t j = 0; j < d; ++j) rows(b * d + r, j) = scale * q(r, j);
    }
  }
  return WeightMatrix(spec, std::move(rows), {});
}

/// Structured orthogonal features: per padded block,
/// (sqrt(d')/sigma) H D1 H D2 H D3 with Rademacher diagonals. Inputs are
/// zero-padded to d'; every padded output coordinate counts as a feature.
inline WeightMatrix build_sorf(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kSorf)
    throw validation_error("build_sorf: family mismatch");
  const std::size_t dp = next_power_of_two(spec.dim);
  const std::size_t s = spec.num_features;
  const std::size_t num_blocks = (s + dp - 1) / dp;

  SorfParams params;
  params.padded_dim = dp;
  params.blocks.resize(num_blocks);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    for (std::size_t k = 0; k < 3; ++k) {
      RngStream rng = detail::block_stream(spec, b, detail::kLabelSign + k);
      params.blocks[b][k] = rademacher(rng, dp);
    }
  }

  DenseMatrix rows(s, spec.dim);
  detail::fill_rows_from_blocks(
      rows, dp, num_blocks,
      [&](std::size_t b, std::span<const double> x, std::span<double> out) {
        detail::sorf_block_matvec(params.blocks[b], spec.sigma, x, out);
      });

  WeightMatrix wm(spec, std::move(rows), {});
  wm.set_sorf(std::move(params));
  return wm;
}

/// Quasi-Monte Carlo rows: inverse normal CDF of the d-dimensional Halton
/// sequence (indices 1..s, bases the first d primes), scaled by 1/sigma.
inline WeightMatrix build_qmc(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kQmc)
    throw validation_error("build_qmc: family mismatch");
  if (spec.dim > kMaxHaltonDims)
    throw capacity_error("build_qmc: dim exceeds the prime table (4096)");
  DenseMatrix rows(spec.num_features, spec.dim);
  const double inv_sigma = 1.0 / spec.sigma;
  for (std::size_t i = 0; i < spec.num_features; ++i) {
    const auto point = gaussian_halton_point(i + 1, spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) rows(i, j) = point[j] * inv_sigma;
  }
  BuildMetadata meta;
  meta.deterministic = true;
  return WeightMatrix(spec, std::move(rows), meta);
}

/// Moment matching: QMC rows whitened by the sample mean and the inverse of
/// the lower Cholesky factor of their sample covariance.
inline WeightMatrix build_mm(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kMm)
    throw validation_error("build_mm: family mismatch");
  const std::size_t s = spec.num_features;
  const std::size_t d = spec.dim;
  if (s < d + 1)
    throw validation_error("build_mm: needs num_features >= dim + 1");
  if (d > kMaxHaltonDims)
    throw capacity_error("build_mm: dim exceeds the prime table (4096)");

  Eigen::MatrixXd raw(s, d);
  for (std::size_t i = 0; i < s; ++i) {
    const auto point = gaussian_halton_point(i + 1, d);
    for (std::size_t j = 0; j < d; ++j) raw(i, j) = point[j];
  }
  const Eigen::RowVectorXd mean = raw.colwise().mean();
  const Eigen::MatrixXd centered = raw.rowwise() - mean;
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(s - 1);

  BuildMetadata meta;
  meta.deterministic = true;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
    meta.covariance_regularized = true;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw numeric_error("build_mm: sample covariance not factorizable");
  }

  const Eigen::MatrixXd whitened =
      llt.matrixL().solve(centered.transpose()).transpose();
  DenseMatrix rows(s, d);
  const double inv_sigma = 1.0 / spec.sigma;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < d; ++j) rows(i, j) = whitened(i, j) * inv_sigma;
  return WeightMatrix(spec, std::move(rows), meta);
}

/// Sparse-grid quadrature rows: the (2d+1)-row block
/// [0, p e_1..p e_d, -p e_1..-p e_d] / sigma with p = sqrt(3). When s is not
/// exactly 2d+1, independently randomized copies (sign per axis, permuted
/// axes) are stacked and truncated.
inline WeightMatrix build_sgq(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kSgq)
    throw validation_error("build_sgq: family mismatch");
  const std::size_t d = spec.dim;
  const std::size_t s = spec.num_features;
  const std::size_t block_rows = 2 * d + 1;
  const SgqConfig config;
  const double node = config.node / spec.sigma;

  DenseMatrix rows(s, d);
  if (s == block_rows) {
    for (std::size_t i = 0; i < d; ++i) {
      rows(1 + i, i) = node;
      rows(1 + d + i, i) = -node;
    }
  } else {
    const std::size_t num_copies = (s + block_rows - 1) / block_rows;
    std::size_t next_row = 0;
    for (std::size_t c = 0; c < num_copies && next_row < s; ++c) {
      RngStream sign_rng = detail::block_stream(spec, c, detail::kLabelSign);
      RngStream perm_rng = detail::block_stream(spec, c, detail::kLabelPerm);
      const auto signs = rademacher(sign_rng, d);
      const auto perm = random_permutation(perm_rng, d);
      for (std::size_t r = 0; r < block_rows && next_row < s; ++r, ++next_row) {
        if (r == 0) continue;  // zero row
        const std::size_t axis = (r - 1) % d;
        const double sign = (r <= d) ? 1.0 : -1.0;
        rows(next_row, perm[axis]) = sign * signs[axis] * node;
      }
    }
  }
  BuildMetadata meta;
  meta.deterministic = true;
  WeightMatrix wm(spec, std::move(rows), meta);
  wm.set_sgq(config);
  return wm;
}

/// Hadamard-diagonal product per padded block: (1/sigma) S H G Pi H B with B
/// Rademacher, G Gaussian, Pi a permutation and S chosen so each row's norm
/// is an independent chi_{d'} draw, matching Gaussian row norms.
inline WeightMatrix build_fastfood(const WeightMatrixSpec& spec) {
  validate(spec);
  if (spec.family != WeightFamily::kFastFoodFixed &&
      spec.family != WeightFamily::kFastFoodLearnable)
    throw validation_error("build_fastfood: family mismatch");
  if (spec.family == WeightFamily::kFastFoodFixed && !spec.learnable.empty())
    throw validation_error("build_fastfood: fastfood_f takes no learnable diagonals");
  if (spec.family == WeightFamily::kFastFoodLearnable) {
    for (auto diag : spec.learnable)
      if (diag != FastFoodDiagonal::kScale && diag != FastFoodDiagonal::kGauss &&
          diag != FastFoodDiagonal::kSign)
        throw validation_error("build_fastfood: unknown learnable diagonal");
  }

  const std::size_t dp = next_power_of_two(spec.dim);
  const std::size_t s = spec.num_features;
  const std::size_t num_blocks = (s + dp - 1) / dp;

  FastFoodParams params;
  params.padded_dim = dp;
  params.learnable = spec.learnable;
  params.blocks.resize(num_blocks);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    auto& block = params.blocks[b];
    RngStream sign_rng = detail::block_stream(spec, b, detail::kLabelSign);
    RngStream perm_rng = detail::block_stream(spec, b, detail::kLabelPerm);
    RngStream gauss_rng = detail::block_stream(spec, b, detail::kLabelGaussDiag);
    RngStream chi_rng = detail::block_stream(spec, b, detail::kLabelChi);
    block.sign = rademacher(sign_rng, dp);
    block.perm = random_permutation(perm_rng, dp);
    block.gauss = gaussian(gauss_rng, dp);
    const double gauss_norm = std::sqrt(squared_norm(block.gauss));
    const double normalizer = std::sqrt(static_cast<double>(dp)) / gauss_norm;
    block.scale.resize(dp);
    for (std::size_t i = 0; i < dp; ++i)
      block.scale[i] = chi_sample(chi_rng, dp) * normalizer;
  }

  DenseMatrix rows(s, spec.dim);
  detail::fill_rows_from_blocks(
      rows, dp, num_blocks,
      [&](std::size_t b, std::span<const double> x, std::span<double> out) {
        detail::fastfood_block_matvec(params.blocks[b], spec.sigma, x, out);
      });

  WeightMatrix wm(spec, std::move(rows), {});
  wm.set_fastfood(std::move(params));
  return wm;
}

inline WeightMatrix build_weight_matrix(const WeightMatrixSpec& spec) {
  switch (spec.family) {
    case WeightFamily::kBase: return build_base(spec);
    case WeightFamily::kOrf: return build_orf(spec);
    case WeightFamily::kSorf: return build_sorf(spec);
    case WeightFamily::kQmc: return build_qmc(spec);
    case WeightFamily::kMm: return build_mm(spec);
    case WeightFamily::kSgq: return build_sgq(spec);
    case WeightFamily::kFastFoodFixed:
    case WeightFamily::kFastFoodLearnable: return build_fastfood(spec);
  }
  throw validation_error("build_weight_matrix: unknown family");
}

/// Rebuild the explicit rows (and implicit handle) for a FastFood matrix from
/// possibly-updated parameters.
inline WeightMatrix materialize_fastfood(const WeightMatrixSpec& spec,
                                         FastFoodParams params) {
  validate(spec);
  const std::size_t dp = params.padded_dim;
  const std::size_t num_blocks = params.blocks.size();
  DenseMatrix rows(spec.num_features, spec.dim);
  detail::fill_rows_from_blocks(
      rows, dp, num_blocks,
      [&](std::size_t b, std::span<const double> x, std::span<double> out) {
        detail::fastfood_block_matvec(params.blocks[b], spec.sigma, x, out);
      });
  WeightMatrix wm(spec, std::move(rows), {});
  wm.set_fastfood(std::move(params));
  return wm;
}

/// W x straight from FastFood parameters; used where the parameters change
/// every step and materializing explicit rows would be wasted work.
inline std::vector<double> fastfood_matvec(const FastFoodParams& params, double sigma,
                                           std::size_t num_features,
                                           std::span<const double> x) {
  const std::size_t dp = params.padded_dim;
  std::vector<double> x_padded(dp, 0.0);
  std::copy(x.begin(), x.end(), x_padded.begin());
  std::vector<double> out(num_features);
  std::vector<double> block_out(dp);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const std::size_t take = std::min(dp, num_features - b * dp);
    if (take == 0) break;
    detail::fastfood_block_matvec(params.blocks[b], sigma, x_padded, block_out);
    std::copy_n(block_out.begin(), take, out.begin() + b * dp);
  }
  return out;
}

/// Gradients for the learnable FastFood diagonals. An empty vector means "no
/// gradient supplied" for that diagonal of that block.
struct FastFoodGrads {
  struct Block {
    std::vector<double> scale;
    std::vector<double> gauss;
    std::vector<double> sign;
  };
  std::vector<Block> blocks;
};

/// One gradient-descent step on the learnable diagonals. Scale entries are
/// clamped at 1e-8; sign entries, when learnable, are treated as plain reals.
inline FastFoodParams fastfood_update(const FastFoodParams& params,
                                      const FastFoodGrads& grads, double step) {
  if (!(step >= 0.0)) throw validation_error("fastfood_update: step must be >= 0");
  if (grads.blocks.size() != params.blocks.size())
    throw shape_error("fastfood_update: block count mismatch");

  FastFoodParams out = params;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const auto& g = grads.blocks[b];
    auto& block = out.blocks[b];
    auto apply = [&](std::vector<double>& values, const std::vector<double>& grad,
                     FastFoodDiagonal diag, bool clamp) {
      if (grad.empty()) return;
      if (!params.is_learnable(diag))
        throw validation_error("fastfood_update: gradient on a frozen diagonal");
      if (grad.size() != values.size())
        throw shape_error("fastfood_update: gradient length mismatch");
      for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] -= step * grad[i];
        if (clamp && values[i] < 1e-8) values[i] = 1e-8;
      }
    };
    apply(block.scale, g.scale, FastFoodDiagonal::kScale, /*clamp=*/true);
    apply(block.gauss, g.gauss, FastFoodDiagonal::kGauss, /*clamp=*/false);
    apply(block.sign, g.sign, FastFoodDiagonal::kSign, /*clamp=*/false);
  }
  return out;
}

}  // namespace rfattn
