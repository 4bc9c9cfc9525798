#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/feature_map.hpp"
#include "rfattn/matrix.hpp"

namespace rfattn {

/// One attention problem: N x d queries and keys, N x d_v values, and the
/// key dimension d_k of the softmax temperature.
struct AttentionBatch {
  DenseMatrix queries;
  DenseMatrix keys;
  DenseMatrix values;
  std::size_t key_dim = 0;
};

inline void validate(const AttentionBatch& batch) {
  if (batch.queries.rows() < 1) throw validation_error("attention: empty batch");
  if (batch.queries.cols() != batch.keys.cols())
    throw shape_error("attention: query/key dimension mismatch");
  if (batch.keys.rows() != batch.values.rows())
    throw shape_error("attention: key/value row count mismatch");
  if (batch.key_dim < 1) throw validation_error("attention: key_dim must be >= 1");
  if (!batch.queries.all_finite() || !batch.keys.all_finite() ||
      !batch.values.all_finite())
    throw numeric_error("attention: non-finite input");
}

struct AttentionOutput {
  DenseMatrix output;                   // N x d_v
  std::vector<double> log_normalizers;  // per-row denominator, log scale
};

/// O(N^2 d) reference oracle: softmax(Q K^T / sqrt(d_k)) V with a
/// row-max-subtracted softmax.
inline AttentionOutput exact_softmax_attention(const AttentionBatch& batch) {
  validate(batch);
  const std::size_t n = batch.queries.rows();
  const std::size_t n_keys = batch.keys.rows();
  const std::size_t d_v = batch.values.cols();
  const double inv_temp = 1.0 / std::sqrt(static_cast<double>(batch.key_dim));

  AttentionOutput result{DenseMatrix(n, d_v), std::vector<double>(n)};
  std::vector<double> scores(n_keys);
  for (std::size_t i = 0; i < n; ++i) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_keys; ++j) {
      scores[j] = dot(batch.queries.row(i), batch.keys.row(j)) * inv_temp;
      max_score = std::max(max_score, scores[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n_keys; ++j) {
      scores[j] = std::exp(scores[j] - max_score);
      denom += scores[j];
    }
    auto out = result.output.row(i);
    for (std::size_t j = 0; j < n_keys; ++j) {
      const double w = scores[j] / denom;
      const auto v = batch.values.row(j);
      for (std::size_t c = 0; c < d_v; ++c) out[c] += w * v[c];
    }
    result.log_normalizers[i] = std::log(denom) + max_score;
  }
  return result;
}

/// Nadaraya-Watson estimator over an arbitrary kernel:
/// A_i = sum_j K(q_i,k_j) v_j / sum_l K(q_i,k_l).
inline AttentionOutput kernel_estimator_attention(
    const AttentionBatch& batch,
    const std::function<double(std::span<const double>, std::span<const double>)>&
        kernel) {
  validate(batch);
  const std::size_t n = batch.queries.rows();
  const std::size_t n_keys = batch.keys.rows();
  const std::size_t d_v = batch.values.cols();

  AttentionOutput result{DenseMatrix(n, d_v), std::vector<double>(n)};
  std::vector<double> weights(n_keys);
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < n_keys; ++j) {
      weights[j] = kernel(batch.queries.row(i), batch.keys.row(j));
      denom += weights[j];
    }
    if (!(denom > 0.0))
      throw degenerate_row_error(
          i, "kernel estimator: non-positive normalizer at row " + std::to_string(i));
    auto out = result.output.row(i);
    for (std::size_t j = 0; j < n_keys; ++j) {
      const double w = weights[j] / denom;
      const auto v = batch.values.row(j);
      for (std::size_t c = 0; c < d_v; ++c) out[c] += w * v[c];
    }
    result.log_normalizers[i] = std::log(denom);
  }
  return result;
}

struct LinearizedAttentionResult {
  AttentionOutput attention;
  std::vector<std::size_t> degenerate_rows;  // rows with normalizer <= 0
};

/// Linear-time attention: precompute sum_j phi(k_j) (x) v_j and
/// sum_j phi(k_j), then each query row costs O(m d_v). The feature batches'
/// log compensators are reapplied, so the result equals the unstabilized
/// ratio exactly. Degenerate rows are reported with NaN output, not clamped.
inline LinearizedAttentionResult linearized_attention_counted(
    const FeatureBatch& query_features, const FeatureBatch& key_features,
    const DenseMatrix& values) {
  const std::size_t n = query_features.phi.rows();
  const std::size_t n_keys = key_features.phi.rows();
  const std::size_t m = query_features.phi.cols();
  if (key_features.phi.cols() != m)
    throw shape_error("linearized attention: feature width mismatch");
  if (values.rows() != n_keys)
    throw shape_error("linearized attention: key/value row count mismatch");
  const std::size_t d_v = values.cols();

  // Key compensators do not cancel in the ratio; shift by their max so the
  // reapplied weights stay in (0, 1].
  double max_log = key_features.log_scale.empty()
                       ? 0.0
                       : *std::max_element(key_features.log_scale.begin(),
                                           key_features.log_scale.end());
  DenseMatrix key_value_sum(m, d_v);
  std::vector<double> key_sum(m, 0.0);
  for (std::size_t j = 0; j < n_keys; ++j) {
    const double w = std::exp(key_features.log_scale[j] - max_log);
    const auto phi_k = key_features.phi.row(j);
    const auto v = values.row(j);
    for (std::size_t f = 0; f < m; ++f) {
      const double scaled = w * phi_k[f];
      key_sum[f] += scaled;
      auto kv = key_value_sum.row(f);
      for (std::size_t c = 0; c < d_v; ++c) kv[c] += scaled * v[c];
    }
  }

  LinearizedAttentionResult result{
      {DenseMatrix(n, d_v), std::vector<double>(n)}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto phi_q = query_features.phi.row(i);
    const double denom = dot(phi_q, key_sum);
    auto out = result.attention.output.row(i);
    if (!(denom > 0.0)) {
      result.degenerate_rows.push_back(i);
      std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
      result.attention.log_normalizers[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    for (std::size_t f = 0; f < m; ++f) {
      if (phi_q[f] == 0.0) continue;
      const auto kv = key_value_sum.row(f);
      for (std::size_t c = 0; c < d_v; ++c) out[c] += phi_q[f] * kv[c];
    }
    for (std::size_t c = 0; c < d_v; ++c) out[c] /= denom;
    result.attention.log_normalizers[i] =
        std::log(denom) + query_features.log_scale[i] + max_log;
  }
  return result;
}

/// As above, but a degenerate row raises instead of being reported.
inline AttentionOutput linearized_attention(const FeatureBatch& query_features,
                                            const FeatureBatch& key_features,
                                            const DenseMatrix& values) {
  auto result = linearized_attention_counted(query_features, key_features, values);
  if (!result.degenerate_rows.empty())
    throw degenerate_row_error(result.degenerate_rows.front(),
                               "linearized attention: non-positive normalizer at row " +
                                   std::to_string(result.degenerate_rows.front()));
  return std::move(result.attention);
}

struct AttentionErrorMetrics {
  double max_row_l2 = 0.0;
  double mean_row_l2 = 0.0;
  double rel_frobenius = 0.0;
};

/// Row-wise L2 error (max and mean) and relative Frobenius error between an
/// approximate and an exact attention output. Rows listed in `skip_rows`
/// (e.g. degenerate ones) are excluded.
inline AttentionErrorMetrics attention_error(
    const AttentionOutput& approx, const AttentionOutput& exact,
    std::span<const std::size_t> skip_rows = {}) {
  if (approx.output.rows() != exact.output.rows() ||
      approx.output.cols() != exact.output.cols())
    throw shape_error("attention_error: shape mismatch");

  AttentionErrorMetrics metrics;
  double diff_sq_total = 0.0, exact_sq_total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < approx.output.rows(); ++i) {
    if (std::find(skip_rows.begin(), skip_rows.end(), i) != skip_rows.end()) continue;
    double row_sq = 0.0;
    for (std::size_t c = 0; c < approx.output.cols(); ++c) {
      const double diff = approx.output(i, c) - exact.output(i, c);
      row_sq += diff * diff;
      exact_sq_total += exact.output(i, c) * exact.output(i, c);
    }
    diff_sq_total += row_sq;
    const double row_l2 = std::sqrt(row_sq);
    metrics.max_row_l2 = std::max(metrics.max_row_l2, row_l2);
    metrics.mean_row_l2 += row_l2;
    ++counted;
  }
  if (counted > 0) metrics.mean_row_l2 /= static_cast<double>(counted);
  if (exact_sq_total > 0.0)
    metrics.rel_frobenius = std::sqrt(diff_sq_total / exact_sq_total);
  return metrics;
}

}  // namespace rfattn
