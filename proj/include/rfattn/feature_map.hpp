#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/matrix.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/weight_matrix.hpp"

namespace rfattn {

enum class ComponentKind { kTrigRf, kPosRf, kPosRfHyp, kGerf, kOprf, kSaderf };

inline std::string to_token(ComponentKind k) {
  switch (k) {
    case ComponentKind::kTrigRf: return "trigrf";
    case ComponentKind::kPosRf: return "posrf";
    case ComponentKind::kPosRfHyp: return "posrf_hyp";
    case ComponentKind::kGerf: return "gerf";
    case ComponentKind::kOprf: return "oprf";
    case ComponentKind::kSaderf: return "saderf";
  }
  throw validation_error("unknown component kind");
}

inline ComponentKind component_kind_from_token(const std::string& token) {
  if (token == "trigrf") return ComponentKind::kTrigRf;
  if (token == "posrf") return ComponentKind::kPosRf;
  if (token == "posrf_hyp") return ComponentKind::kPosRfHyp;
  if (token == "gerf") return ComponentKind::kGerf;
  if (token == "oprf") return ComponentKind::kOprf;
  if (token == "saderf") return ComponentKind::kSaderf;
  throw validation_error("unknown component token: " + token);
}

/// Queries go through the first branch of a component function, keys through
/// the second, wherever the two differ.
enum class Role { kQuery, kKey };

/// Number of branches l: two for the trigonometric and hyperbolic maps, one
/// for the exponential family.
inline std::size_t num_component_branches(ComponentKind k) {
  return (k == ComponentKind::kTrigRf || k == ComponentKind::kPosRfHyp) ? 2 : 1;
}

/// True for every kind whose features are strictly positive.
inline bool component_is_positive(ComponentKind k) {
  return k != ComponentKind::kTrigRf;
}

struct ComponentFunctionSpec {
  ComponentKind kind = ComponentKind::kPosRf;
  double gerf_a = 0.0;                // A of the exponential family
  int gerf_sign = +1;                 // s in {-1,+1}
  std::vector<double> trig_offsets;   // b, length s (TrigRF)
  std::vector<double> psi;            // positive diagonal, length d (SADERF)
};

inline bool component_uses_gerf_params(ComponentKind k) {
  return k == ComponentKind::kGerf || k == ComponentKind::kOprf ||
         k == ComponentKind::kSaderf;
}

inline void validate(const ComponentFunctionSpec& comp, std::size_t num_features,
                     std::size_t dim) {
  if (component_uses_gerf_params(comp.kind)) {
    if (comp.gerf_sign != 1 && comp.gerf_sign != -1)
      throw validation_error("component: sign must be +1 or -1");
    if (!(1.0 - 4.0 * comp.gerf_a > 0.0))
      throw validation_error("component: requires 1 - 4A > 0");
    if (comp.gerf_sign * (1.0 - 4.0 * comp.gerf_a) <= 0.0)
      throw validation_error(
          "component: sign * (1 - 4A) <= 0 needs a complex branch; unsupported");
  }
  if (comp.kind == ComponentKind::kSaderf) {
    if (comp.psi.size() != dim)
      throw shape_error("component: psi must have one entry per input dimension");
    for (double v : comp.psi)
      if (!(v > 0.0)) throw validation_error("component: psi entries must be positive");
  }
  if (comp.kind == ComponentKind::kTrigRf && !comp.trig_offsets.empty() &&
      comp.trig_offsets.size() != num_features)
    throw shape_error("component: trig offsets must have one entry per feature");
}

/// Variance-minimizing exponential-family parameter A, derived from the
/// statistic standing in for ||x+y||^2.
inline double derive_oprf_a(double norm_stat, std::size_t dim) {
  if (!(norm_stat > 0.0))
    throw std::domain_error("derive_oprf_a: norm statistic must be positive");
  if (dim < 1) throw std::domain_error("derive_oprf_a: dim must be >= 1");
  const double rho = norm_stat;
  const double d = static_cast<double>(dim);
  const double p_star =
      (std::sqrt((2.0 * rho + d) * (2.0 * rho + d) + 8.0 * d * rho) - 2.0 * rho - d) /
      (4.0 * rho);
  return (1.0 - 1.0 / p_star) / 8.0;
}

/// Linear-time estimate of the pair-mean of ||q + k||^2 over an attention
/// batch, clamped below at 1e-8.
inline double estimate_norm_stat(const DenseMatrix& queries, const DenseMatrix& keys) {
  if (queries.rows() < 1 || keys.rows() < 1)
    throw validation_error("estimate_norm_stat: empty batch");
  if (queries.cols() != keys.cols())
    throw shape_error("estimate_norm_stat: dimension mismatch");
  const std::size_t d = queries.cols();
  double q_sq = 0.0, k_sq = 0.0;
  std::vector<double> q_mean(d, 0.0), k_mean(d, 0.0);
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    q_sq += squared_norm(queries.row(i));
    for (std::size_t j = 0; j < d; ++j) q_mean[j] += queries(i, j);
  }
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    k_sq += squared_norm(keys.row(i));
    for (std::size_t j = 0; j < d; ++j) k_mean[j] += keys(i, j);
  }
  q_sq /= static_cast<double>(queries.rows());
  k_sq /= static_cast<double>(keys.rows());
  double cross = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    cross += (q_mean[j] / queries.rows()) * (k_mean[j] / keys.rows());
  const double stat = q_sq + k_sq + 2.0 * cross;
  return std::max(stat, 1e-8);
}

/// Per-dimension rescaling diagonal: fourth root of the key/query energy
/// ratio, with both sums clamped below at 1e-12.
inline std::vector<double> estimate_psi(const DenseMatrix& queries,
                                        const DenseMatrix& keys) {
  if (queries.rows() < 1 || keys.rows() < 1)
    throw validation_error("estimate_psi: empty batch");
  if (queries.cols() != keys.cols())
    throw shape_error("estimate_psi: dimension mismatch");
  const std::size_t d = queries.cols();
  std::vector<double> psi(d);
  for (std::size_t j = 0; j < d; ++j) {
    double q_sum = 0.0, k_sum = 0.0;
    for (std::size_t i = 0; i < queries.rows(); ++i)
      q_sum += queries(i, j) * queries(i, j);
    for (std::size_t i = 0; i < keys.rows(); ++i) k_sum += keys(i, j) * keys(i, j);
    q_sum = std::max(q_sum, 1e-12);
    k_sum = std::max(k_sum, 1e-12);
    psi[j] = std::pow(k_sum / q_sum, 0.25);
  }
  return psi;
}

/// A composed feature map: weight matrix, component function, l branches and
/// the 1/sqrt(l s) scaling, with unit component weights.
struct FeatureMap {
  WeightMatrix weights;
  ComponentFunctionSpec component;

  /// Per-feature component weight; fixed at 1 across the whole library.
  static constexpr double kComponentWeight = 1.0;

  std::size_t num_branches() const { return num_component_branches(component.kind); }
  std::size_t output_dim() const { return num_branches() * weights.num_features(); }
};

namespace detail {

inline constexpr std::uint64_t kLabelTrigOffsets = 100;

}  // namespace detail

/// Compose a weight matrix with a component function. TrigRF offsets, when
/// not supplied, are drawn uniformly from [0, 2pi) off the matrix seed.
inline FeatureMap make_feature_map(WeightMatrix weights, ComponentFunctionSpec comp) {
  validate(comp, weights.num_features(), weights.dim());
  if (comp.kind == ComponentKind::kTrigRf && comp.trig_offsets.empty()) {
    RngStream rng = RngStream(weights.spec().seed).fork(detail::kLabelTrigOffsets);
    comp.trig_offsets.resize(weights.num_features());
    for (auto& b : comp.trig_offsets)
      b = rng.next_unit() * 2.0 * std::numbers::pi;
  }
  return FeatureMap{std::move(weights), std::move(comp)};
}

struct FeatureApplyOptions {
  bool stabilize = true;
  /// Fold the deterministic exp(||x||^2 / 2) prefactor (with the
  /// SADERF-rescaled norm where applicable) into the row's log scale, so
  /// inner products estimate exp(x.y) instead of the shifted kernel the raw
  /// component targets. No-op for the map that already targets exp(x.y).
  bool softmax_bridge = false;
};

/// Feature rows plus a per-row log-scale compensator. The represented value
/// is exp(log_scale[i]) * phi.row(i); carrying the scalar in log space keeps
/// downstream attention ratios exact when exponents are large.
struct FeatureBatch {
  DenseMatrix phi;
  std::vector<double> log_scale;
};

/// Kernel estimate between row i of one batch and row j of another.
inline double feature_kernel_estimate(const FeatureBatch& a, std::size_t i,
                                      const FeatureBatch& b, std::size_t j) {
  return std::exp(a.log_scale[i] + b.log_scale[j]) * dot(a.phi.row(i), b.phi.row(j));
}

namespace detail {

inline void check_row_finite(std::span<const double> values, double log_scale,
                             std::size_t row) {
  if (!std::isfinite(log_scale))
    throw numeric_error("feature map: non-finite compensator at row " +
                        std::to_string(row));
  for (double v : values)
    if (!std::isfinite(v))
      throw numeric_error("feature map: non-finite feature at row " +
                          std::to_string(row));
}

}  // namespace detail

/// Row-wise application of the composed map. For the exponential family the
/// per-row maximum exponent is subtracted before exponentiation and carried
/// in log_scale.
inline FeatureBatch apply_feature_map(const FeatureMap& fm, const DenseMatrix& inputs,
                                      Role role, FeatureApplyOptions opts = {}) {
  const auto& wm = fm.weights;
  const auto& comp = fm.component;
  if (inputs.cols() != wm.dim())
    throw shape_error("apply_feature_map: input dimension mismatch");

  const std::size_t n = inputs.rows();
  const std::size_t s = wm.num_features();
  const std::size_t m = fm.output_dim();
  const double norm =
      1.0 / std::sqrt(static_cast<double>(fm.num_branches()) * static_cast<double>(s));

  FeatureBatch batch{DenseMatrix(n, m), std::vector<double>(n, 0.0)};

  // Exponential-family constants.
  double coeff_b = 0.0, coeff_c = 0.0, log_d = 0.0;
  std::vector<double> row_sq;
  if (component_uses_gerf_params(comp.kind)) {
    const double one_minus_4a = 1.0 - 4.0 * comp.gerf_a;
    coeff_b = std::sqrt(comp.gerf_sign * one_minus_4a);
    coeff_c = -(comp.gerf_sign + 1.0) / 2.0;
    log_d = 0.25 * static_cast<double>(wm.dim()) * std::log(one_minus_4a);
    row_sq.resize(s);
    for (std::size_t i = 0; i < s; ++i) row_sq[i] = wm.row_squared_norm(i);
  }

  std::vector<double> x(wm.dim());
  std::vector<double> exponents(m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto in_row = inputs.row(r);
    if (comp.kind == ComponentKind::kSaderf) {
      for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = (role == Role::kQuery) ? comp.psi[j] * in_row[j]
                                      : in_row[j] / comp.psi[j];
    } else {
      std::copy(in_row.begin(), in_row.end(), x.begin());
    }
    const double x_sq = squared_norm(std::span<const double>(x));
    const std::vector<double> z = wm.matvec(x);
    auto out_row = batch.phi.row(r);
    double log_scale = opts.softmax_bridge && comp.kind != ComponentKind::kPosRf
                           ? 0.5 * x_sq
                           : 0.0;

    switch (comp.kind) {
      case ComponentKind::kTrigRf: {
        for (std::size_t i = 0; i < s; ++i) {
          const double phase = z[i] + comp.trig_offsets[i];
          out_row[i] = norm * std::numbers::sqrt2 * std::cos(phase);
          out_row[s + i] = norm * std::numbers::sqrt2 * std::sin(phase);
        }
        break;
      }
      case ComponentKind::kPosRf: {
        for (std::size_t i = 0; i < s; ++i) exponents[i] = z[i] - 0.5 * x_sq;
        break;
      }
      case ComponentKind::kPosRfHyp: {
        for (std::size_t i = 0; i < s; ++i) {
          exponents[i] = z[i] - x_sq;
          exponents[s + i] = -z[i] - x_sq;
        }
        break;
      }
      case ComponentKind::kGerf:
      case ComponentKind::kOprf:
      case ComponentKind::kSaderf: {
        const double b_eff =
            (role == Role::kKey) ? comp.gerf_sign * coeff_b : coeff_b;
        for (std::size_t i = 0; i < s; ++i)
          exponents[i] =
              comp.gerf_a * row_sq[i] + b_eff * z[i] + coeff_c * x_sq + log_d;
        break;
      }
    }

    if (comp.kind != ComponentKind::kTrigRf) {
      double shift = 0.0;
      if (opts.stabilize) {
        shift = exponents[0];
        for (std::size_t i = 1; i < m; ++i) shift = std::max(shift, exponents[i]);
      }
      for (std::size_t i = 0; i < m; ++i)
        out_row[i] = norm * std::exp(exponents[i] - shift);
      log_scale += shift;
    }
    batch.log_scale[r] = log_scale;
    detail::check_row_finite(out_row, log_scale, r);
  }
  return batch;
}

namespace detail {

// Single-vector path: run the N=1 batch apply and fold the compensator back
// into plain feature values.
inline std::vector<double> single_vector_features(const FeatureMap& fm,
                                                  std::span<const double> x,
                                                  Role role) {
  DenseMatrix inputs(1, x.size());
  std::copy(x.begin(), x.end(), inputs.row(0).begin());
  const FeatureBatch batch = apply_feature_map(fm, inputs, role);
  const double scale = std::exp(batch.log_scale[0]);
  std::vector<double> out(batch.phi.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = scale * batch.phi(0, i);
    if (!std::isfinite(out[i]))
      throw numeric_error("feature map: overflow despite stabilizer");
  }
  return out;
}

}  // namespace detail

/// (1/sqrt(ls)) [sqrt(2) cos(Wx + b); sqrt(2) sin(Wx + b)], length 2s.
inline std::vector<double> trigrf(const WeightMatrix& weights,
                                  std::span<const double> offsets,
                                  std::span<const double> x) {
  ComponentFunctionSpec comp;
  comp.kind = ComponentKind::kTrigRf;
  comp.trig_offsets.assign(offsets.begin(), offsets.end());
  return detail::single_vector_features(make_feature_map(weights, std::move(comp)), x,
                                        Role::kQuery);
}

/// (1/sqrt(s)) exp(Wx - ||x||^2 / 2), length s.
inline std::vector<double> posrf_b(const WeightMatrix& weights,
                                   std::span<const double> x) {
  ComponentFunctionSpec comp;
  comp.kind = ComponentKind::kPosRf;
  return detail::single_vector_features(make_feature_map(weights, std::move(comp)), x,
                                        Role::kQuery);
}

/// (1/sqrt(2s)) [exp(Wx - ||x||^2); exp(-Wx - ||x||^2)], length 2s.
inline std::vector<double> posrf_hyp(const WeightMatrix& weights,
                                     std::span<const double> x) {
  ComponentFunctionSpec comp;
  comp.kind = ComponentKind::kPosRfHyp;
  return detail::single_vector_features(make_feature_map(weights, std::move(comp)), x,
                                        Role::kQuery);
}

/// Exponential family: per row w, D exp(A||w||^2 + B w.x (sign for keys)
/// + C||x||^2) with B = sqrt(sign (1-4A)), C = -(sign+1)/2, D = (1-4A)^{d/4}.
inline std::vector<double> gerf(const WeightMatrix& weights, std::span<const double> x,
                                double a, int sign, Role role) {
  ComponentFunctionSpec comp;
  comp.kind = ComponentKind::kGerf;
  comp.gerf_a = a;
  comp.gerf_sign = sign;
  return detail::single_vector_features(make_feature_map(weights, std::move(comp)), x,
                                        role);
}

/// Exponential family on the rescaled input: Psi x for queries, Psi^{-1} x
/// for keys.
inline std::vector<double> saderf(const WeightMatrix& weights,
                                  std::span<const double> x,
                                  std::span<const double> psi, Role role, double a,
                                  int sign) {
  ComponentFunctionSpec comp;
  comp.kind = ComponentKind::kSaderf;
  comp.gerf_a = a;
  comp.gerf_sign = sign;
  comp.psi.assign(psi.begin(), psi.end());
  return detail::single_vector_features(make_feature_map(weights, std::move(comp)), x,
                                        role);
}

}  // namespace rfattn
