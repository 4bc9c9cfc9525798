#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfattn/alloc_tracker.hpp"
#include "rfattn/attention.hpp"
#include "rfattn/errors.hpp"
#include "rfattn/feature_map.hpp"
#include "rfattn/kernels.hpp"
#include "rfattn/weight_matrix.hpp"

namespace rfattn::bench {

using json = nlohmann::ordered_json;

struct RunConfig {
  std::string component = "posrf";
  std::string matrix = "orf";
  std::size_t num_features = 128;  // s
  std::size_t dim = 16;            // d
  std::size_t value_dim = 16;      // d_v
  std::size_t seq_len = 64;        // N
  double sigma = 1.0;
  std::size_t key_dim = 16;        // d_k
  std::size_t num_pairs = 64;
  std::size_t num_rebuilds = 20;
  std::uint64_t seed = 42;
  double input_scale = 1.0;
  std::uint64_t build_salt = 0;    // grid cell index; 0 for single runs
  double gerf_a = 0.0;             // gerf component only
  int gerf_sign = 1;
  std::string fastfood_learnable = "s";  // "s" or "sgb"
  std::string output_path;
  std::string format = "json";
};

inline void validate(const RunConfig& config) {
  component_kind_from_token(config.component);
  weight_family_from_token(config.matrix);
  if (config.num_features < 1 || config.dim < 1 || config.value_dim < 1 ||
      config.seq_len < 1 || config.key_dim < 1 || config.num_pairs < 1 ||
      config.num_rebuilds < 1)
    throw validation_error("config: all counts must be >= 1");
  if (!(config.sigma > 0.0)) throw validation_error("config: sigma must be positive");
  if (!(config.input_scale > 0.0))
    throw validation_error("config: input_scale must be positive");
  if (config.format != "json" && config.format != "csv")
    throw validation_error("config: format must be json or csv");
  if (config.fastfood_learnable != "s" && config.fastfood_learnable != "sgb")
    throw validation_error("config: fastfood_learnable must be 's' or 'sgb'");
}

struct BenchReport {
  RunConfig config;
  double kernel_mse = 0.0;
  double kernel_bias = 0.0;
  double estimator_variance = 0.0;
  double attention_max_row_l2 = 0.0;
  double attention_mean_rel = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t peak_bytes = 0;
  std::size_t degenerate_rows = 0;
  std::size_t rebuilds_used = 0;
  bool deterministic_matrix = false;
  bool covariance_regularized = false;
  bool failed = false;
  std::string error;
};

namespace detail {

inline constexpr std::uint64_t kStreamPairs = 1;
inline constexpr std::uint64_t kStreamBatch = 2;
inline constexpr std::uint64_t kStreamBuilds = 3;

inline DenseMatrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols,
                                   double scale) {
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = rng.next_gaussian() * scale;
  return out;
}

inline std::uint64_t build_seed(const RunConfig& config, std::size_t rebuild) {
  return RngStream(config.seed)
      .fork(kStreamBuilds)
      .fork(config.build_salt)
      .fork(rebuild)
      .next_u64();
}

inline DenseMatrix scaled(const DenseMatrix& x, double factor) {
  DenseMatrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= factor;
  return out;
}

/// Component spec for a (query-set, key-set) data context. OPRF/SADERF derive
/// their batch statistics here, once per batch.
inline ComponentFunctionSpec component_for_batch(const RunConfig& config,
                                                 ComponentKind kind,
                                                 const DenseMatrix& queries,
                                                 const DenseMatrix& keys) {
  ComponentFunctionSpec comp;
  comp.kind = kind;
  switch (kind) {
    case ComponentKind::kGerf:
      comp.gerf_a = config.gerf_a;
      comp.gerf_sign = config.gerf_sign;
      break;
    case ComponentKind::kOprf:
      comp.gerf_a = derive_oprf_a(estimate_norm_stat(queries, keys), config.dim);
      break;
    case ComponentKind::kSaderf: {
      comp.psi = estimate_psi(queries, keys);
      DenseMatrix q_scaled = queries, k_scaled = keys;
      for (std::size_t i = 0; i < queries.rows(); ++i)
        for (std::size_t j = 0; j < queries.cols(); ++j)
          q_scaled(i, j) *= comp.psi[j];
      for (std::size_t i = 0; i < keys.rows(); ++i)
        for (std::size_t j = 0; j < keys.cols(); ++j) k_scaled(i, j) /= comp.psi[j];
      comp.gerf_a = derive_oprf_a(estimate_norm_stat(q_scaled, k_scaled), config.dim);
      break;
    }
    default: break;
  }
  return comp;
}

/// The exact kernel a combination is measured against. TrigRF is the
/// shift-invariant estimator and targets the RBF at the run's sigma; the
/// positive kinds are calibrated to the softmax kernel exp(x.y) through the
/// prefactor bridge (exact at sigma = 1).
inline double target_kernel(ComponentKind kind, std::span<const double> x,
                            std::span<const double> y, double sigma) {
  if (kind == ComponentKind::kTrigRf) return rbf_kernel(x, y, sigma);
  return std::exp(dot(x, y));
}

}  // namespace detail

/// Run one component x matrix combination: kernel bias/variance/MSE over
/// independent rebuilds on a fixed pair set, plus linearized-attention error
/// against the exact softmax oracle on one synthetic batch.
inline BenchReport run_combination(const RunConfig& config) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  alloc_stats().reset_peak();

  const ComponentKind kind = component_kind_from_token(config.component);
  const WeightFamily family = weight_family_from_token(config.matrix);

  BenchReport report;
  report.config = config;
  report.deterministic_matrix = family_is_deterministic(family);
  const std::size_t rebuilds =
      report.deterministic_matrix ? 1 : config.num_rebuilds;
  report.rebuilds_used = rebuilds;

  // Evaluation data; a function of the seed alone so grid cells share it.
  // Per-coordinate scale carries the d^{-1/4} factor, so x.y has unit-order
  // spread at input_scale 1 and the attention inputs end up near unit norm
  // after the d_k^{-1/4} temperature split.
  const double coord_scale =
      config.input_scale * std::pow(static_cast<double>(config.dim), -0.25);
  RngStream pair_rng = RngStream(config.seed).fork(detail::kStreamPairs);
  const DenseMatrix pair_x =
      detail::gaussian_matrix(pair_rng, config.num_pairs, config.dim, coord_scale);
  const DenseMatrix pair_y =
      detail::gaussian_matrix(pair_rng, config.num_pairs, config.dim, coord_scale);
  RngStream batch_rng = RngStream(config.seed).fork(detail::kStreamBatch);
  AttentionBatch batch{
      detail::gaussian_matrix(batch_rng, config.seq_len, config.dim, coord_scale),
      detail::gaussian_matrix(batch_rng, config.seq_len, config.dim, coord_scale),
      detail::gaussian_matrix(batch_rng, config.seq_len, config.value_dim, 1.0),
      config.key_dim};

  std::vector<double> targets(config.num_pairs);
  for (std::size_t p = 0; p < config.num_pairs; ++p)
    targets[p] = detail::target_kernel(kind, pair_x.row(p), pair_y.row(p), config.sigma);

  std::vector<double> estimate_sum(config.num_pairs, 0.0);
  std::vector<double> estimate_sq_sum(config.num_pairs, 0.0);
  double mse_acc = 0.0;
  const FeatureApplyOptions kernel_opts{.stabilize = true,
                                        .softmax_bridge =
                                            kind != ComponentKind::kTrigRf};

  for (std::size_t r = 0; r < rebuilds; ++r) {
    WeightMatrixSpec wspec;
    wspec.family = family;
    wspec.num_features = config.num_features;
    wspec.dim = config.dim;
    wspec.sigma = config.sigma;
    wspec.seed = detail::build_seed(config, r);
    if (family == WeightFamily::kFastFoodLearnable)
      wspec.learnable = config.fastfood_learnable == "sgb"
                            ? std::vector<FastFoodDiagonal>{FastFoodDiagonal::kScale,
                                                            FastFoodDiagonal::kGauss,
                                                            FastFoodDiagonal::kSign}
                            : std::vector<FastFoodDiagonal>{FastFoodDiagonal::kScale};
    const WeightMatrix wm = build_weight_matrix(wspec);
    report.covariance_regularized |= wm.metadata().covariance_regularized;

    const FeatureMap fm = make_feature_map(
        wm, detail::component_for_batch(config, kind, pair_x, pair_y));
    const FeatureBatch phi_x = apply_feature_map(fm, pair_x, Role::kQuery, kernel_opts);
    const FeatureBatch phi_y = apply_feature_map(fm, pair_y, Role::kKey, kernel_opts);
    for (std::size_t p = 0; p < config.num_pairs; ++p) {
      const double est = feature_kernel_estimate(phi_x, p, phi_y, p);
      if (!std::isfinite(est))
        throw numeric_error("run_combination: non-finite kernel estimate at pair " +
                            std::to_string(p));
      estimate_sum[p] += est;
      estimate_sq_sum[p] += est * est;
      const double err = est - targets[p];
      mse_acc += err * err;
    }

    if (r == 0) {
      const double scale_in =
          std::pow(static_cast<double>(config.key_dim), -0.25);
      const DenseMatrix q_scaled = detail::scaled(batch.queries, scale_in);
      const DenseMatrix k_scaled = detail::scaled(batch.keys, scale_in);
      const FeatureMap fm_attn = make_feature_map(
          wm, detail::component_for_batch(config, kind, q_scaled, k_scaled));
      const FeatureApplyOptions attn_opts{.stabilize = true, .softmax_bridge = true};
      const FeatureBatch phi_q =
          apply_feature_map(fm_attn, q_scaled, Role::kQuery, attn_opts);
      const FeatureBatch phi_k =
          apply_feature_map(fm_attn, k_scaled, Role::kKey, attn_opts);
      const auto lin = linearized_attention_counted(phi_q, phi_k, batch.values);
      const AttentionOutput exact = exact_softmax_attention(batch);
      report.degenerate_rows = lin.degenerate_rows.size();
      const auto metrics =
          attention_error(lin.attention, exact, lin.degenerate_rows);
      report.attention_max_row_l2 = metrics.max_row_l2;
      report.attention_mean_rel = metrics.rel_frobenius;
    }
  }

  const double n_estimates = static_cast<double>(config.num_pairs * rebuilds);
  report.kernel_mse = mse_acc / n_estimates;
  double bias_acc = 0.0, var_acc = 0.0;
  for (std::size_t p = 0; p < config.num_pairs; ++p) {
    const double mean = estimate_sum[p] / static_cast<double>(rebuilds);
    bias_acc += mean - targets[p];
    if (rebuilds > 1) {
      const double ex2 = estimate_sq_sum[p] / static_cast<double>(rebuilds);
      var_acc += std::max(0.0, ex2 - mean * mean) * static_cast<double>(rebuilds) /
                 static_cast<double>(rebuilds - 1);
    }
  }
  report.kernel_bias = bias_acc / static_cast<double>(config.num_pairs);
  report.estimator_variance =
      rebuilds > 1 ? var_acc / static_cast<double>(config.num_pairs) : 0.0;

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.peak_bytes = alloc_stats().peak.load();
  return report;
}

inline std::vector<std::string> default_grid_components() {
  return {"posrf", "oprf", "saderf"};
}

inline std::vector<std::string> default_grid_matrices() {
  return {"orf", "sorf", "qmc", "mm", "sgq", "fastfood_l"};
}

/// Run every component x matrix cell. Cells share the synthetic data (same
/// seed-derived pairs and batch) and derive their build streams from the
/// cell index; a fatal cell is marked failed without aborting the grid.
/// Results come back in (component, matrix) lexicographic order regardless
/// of completion order.
inline std::vector<BenchReport> run_grid(const RunConfig& base,
                                         std::vector<std::string> components,
                                         std::vector<std::string> matrices,
                                         std::size_t threads = 1) {
  if (components.empty()) components = default_grid_components();
  if (matrices.empty()) matrices = default_grid_matrices();
  for (const auto& c : components) component_kind_from_token(c);
  for (const auto& m : matrices) weight_family_from_token(m);
  std::sort(components.begin(), components.end());
  std::sort(matrices.begin(), matrices.end());

  std::vector<RunConfig> cells;
  for (const auto& c : components)
    for (const auto& m : matrices) {
      RunConfig cfg = base;
      cfg.component = c;
      cfg.matrix = m;
      cfg.build_salt = cells.size();
      cells.push_back(std::move(cfg));
    }

  auto run_cell = [](const RunConfig& cfg) {
    try {
      return run_combination(cfg);
    } catch (const std::exception& e) {
      BenchReport failed;
      failed.config = cfg;
      failed.failed = true;
      failed.error = e.what();
      return failed;
    }
  };

  std::vector<BenchReport> reports(cells.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) reports[i] = run_cell(cells[i]);
    return reports;
  }
  std::vector<std::future<BenchReport>> futures(cells.size());
  std::size_t next = 0;
  while (next < cells.size()) {
    const std::size_t wave = std::min(threads, cells.size() - next);
    for (std::size_t i = 0; i < wave; ++i)
      futures[next + i] =
          std::async(std::launch::async, run_cell, std::cref(cells[next + i]));
    for (std::size_t i = 0; i < wave; ++i) reports[next + i] = futures[next + i].get();
    next += wave;
  }
  return reports;
}

struct FitTrace {
  std::vector<double> loss;  // steps + 1 entries, initial loss first
  bool failed = false;       // loss did not decrease over the run
};

/// Fit the learnable FastFood diagonals so the trigonometric kernel estimate
/// matches an RBF oracle of bandwidth target_sigma on a fixed pair set,
/// using central-difference gradients (perturbation 1e-5).
inline FitTrace fit_fastfood_learner(const RunConfig& config, double target_sigma,
                                     std::size_t steps, double step_size) {
  validate(config);
  if (weight_family_from_token(config.matrix) != WeightFamily::kFastFoodLearnable)
    throw validation_error("fit_fastfood_learner: matrix must be fastfood_l");
  if (!(target_sigma > 0.0))
    throw validation_error("fit_fastfood_learner: target_sigma must be positive");

  WeightMatrixSpec wspec;
  wspec.family = WeightFamily::kFastFoodLearnable;
  wspec.num_features = config.num_features;
  wspec.dim = config.dim;
  wspec.sigma = config.sigma;
  wspec.seed = detail::build_seed(config, 0);
  wspec.learnable = config.fastfood_learnable == "sgb"
                        ? std::vector<FastFoodDiagonal>{FastFoodDiagonal::kScale,
                                                        FastFoodDiagonal::kGauss,
                                                        FastFoodDiagonal::kSign}
                        : std::vector<FastFoodDiagonal>{FastFoodDiagonal::kScale};
  FastFoodParams params = *build_weight_matrix(wspec).fastfood();

  const double coord_scale =
      config.input_scale * std::pow(static_cast<double>(config.dim), -0.25);
  RngStream pair_rng = RngStream(config.seed).fork(detail::kStreamPairs);
  const DenseMatrix pair_x =
      detail::gaussian_matrix(pair_rng, config.num_pairs, config.dim, coord_scale);
  const DenseMatrix pair_y =
      detail::gaussian_matrix(pair_rng, config.num_pairs, config.dim, coord_scale);
  std::vector<double> targets(config.num_pairs);
  for (std::size_t p = 0; p < config.num_pairs; ++p)
    targets[p] = rbf_kernel(pair_x.row(p), pair_y.row(p), target_sigma);

  // Paired cos/sin estimate collapses to mean cos(W(x - y)); offsets cancel.
  const auto loss = [&](const FastFoodParams& candidate) {
    double acc = 0.0;
    for (std::size_t p = 0; p < config.num_pairs; ++p) {
      const auto zx =
          fastfood_matvec(candidate, config.sigma, config.num_features, pair_x.row(p));
      const auto zy =
          fastfood_matvec(candidate, config.sigma, config.num_features, pair_y.row(p));
      double est = 0.0;
      for (std::size_t i = 0; i < zx.size(); ++i) est += std::cos(zx[i] - zy[i]);
      est /= static_cast<double>(zx.size());
      const double err = est - targets[p];
      acc += err * err;
    }
    return acc / static_cast<double>(config.num_pairs);
  };

  FitTrace trace;
  trace.loss.reserve(steps + 1);
  trace.loss.push_back(loss(params));

  constexpr double kPerturbation = 1e-5;
  for (std::size_t step = 0; step < steps; ++step) {
    FastFoodGrads grads;
    grads.blocks.resize(params.blocks.size());
    auto fill_grad = [&](FastFoodDiagonal diag, auto param_member, auto grad_member) {
      if (!params.is_learnable(diag)) return;
      for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        auto& grad = grads.blocks[b].*grad_member;
        const std::size_t len = (params.blocks[b].*param_member).size();
        grad.resize(len, 0.0);
        for (std::size_t i = 0; i < len; ++i) {
          FastFoodParams probe = params;
          (probe.blocks[b].*param_member)[i] += kPerturbation;
          const double up = loss(probe);
          (probe.blocks[b].*param_member)[i] -= 2.0 * kPerturbation;
          const double down = loss(probe);
          grad[i] = (up - down) / (2.0 * kPerturbation);
        }
      }
    };
    fill_grad(FastFoodDiagonal::kScale, &FastFoodBlockParams::scale,
              &FastFoodGrads::Block::scale);
    fill_grad(FastFoodDiagonal::kGauss, &FastFoodBlockParams::gauss,
              &FastFoodGrads::Block::gauss);
    fill_grad(FastFoodDiagonal::kSign, &FastFoodBlockParams::sign,
              &FastFoodGrads::Block::sign);
    params = fastfood_update(params, grads, step_size);
    trace.loss.push_back(loss(params));
  }
  trace.failed = steps > 0 && !(trace.loss.back() < trace.loss.front());
  return trace;
}

// ---------------------------------------------------------------------------
// Report serialization.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline json config_to_json(const RunConfig& config) {
  json j;
  j["component"] = config.component;
  j["matrix"] = config.matrix;
  j["num_features"] = config.num_features;
  j["dim"] = config.dim;
  j["value_dim"] = config.value_dim;
  j["seq_len"] = config.seq_len;
  j["sigma"] = config.sigma;
  j["key_dim"] = config.key_dim;
  j["num_pairs"] = config.num_pairs;
  j["num_rebuilds"] = config.num_rebuilds;
  j["seed"] = config.seed;
  j["input_scale"] = config.input_scale;
  j["build_salt"] = config.build_salt;
  j["gerf_a"] = config.gerf_a;
  j["gerf_sign"] = config.gerf_sign;
  j["fastfood_learnable"] = config.fastfood_learnable;
  return j;
}

}  // namespace detail

inline json report_to_json(const BenchReport& report) {
  json j;
  j["config"] = detail::config_to_json(report.config);
  j["kernel_mse"] = report.kernel_mse;
  j["kernel_bias"] = report.kernel_bias;
  j["estimator_variance"] = report.estimator_variance;
  j["attention_max_row_l2"] = report.attention_max_row_l2;
  j["attention_mean_rel"] = report.attention_mean_rel;
  j["wall_time_s"] = report.wall_time_s;
  j["peak_bytes"] = report.peak_bytes;
  j["degenerate_rows"] = report.degenerate_rows;
  j["rebuilds_used"] = report.rebuilds_used;
  j["deterministic_matrix"] = report.deterministic_matrix;
  j["covariance_regularized"] = report.covariance_regularized;
  j["failed"] = report.failed;
  j["error"] = report.error;
  return j;
}

inline const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header = {
      "component",      "matrix",         "num_features",
      "dim",            "value_dim",      "seq_len",
      "sigma",          "key_dim",        "num_pairs",
      "num_rebuilds",   "seed",           "input_scale",
      "build_salt",     "kernel_mse",     "kernel_bias",
      "estimator_variance", "attention_max_row_l2", "attention_mean_rel",
      "wall_time_s",    "peak_bytes",     "degenerate_rows",
      "rebuilds_used",  "deterministic_matrix", "covariance_regularized",
      "failed"};
  return header;
}

inline std::string report_to_csv_row(const BenchReport& r) {
  std::ostringstream line;
  line << r.config.component << ',' << r.config.matrix << ','
       << r.config.num_features << ',' << r.config.dim << ',' << r.config.value_dim
       << ',' << r.config.seq_len << ',' << detail::format_double(r.config.sigma)
       << ',' << r.config.key_dim << ',' << r.config.num_pairs << ','
       << r.config.num_rebuilds << ',' << r.config.seed << ','
       << detail::format_double(r.config.input_scale) << ',' << r.config.build_salt
       << ',' << detail::format_double(r.kernel_mse) << ','
       << detail::format_double(r.kernel_bias) << ','
       << detail::format_double(r.estimator_variance) << ','
       << detail::format_double(r.attention_max_row_l2) << ','
       << detail::format_double(r.attention_mean_rel) << ','
       << detail::format_double(r.wall_time_s) << ',' << r.peak_bytes << ','
       << r.degenerate_rows << ',' << r.rebuilds_used << ','
       << (r.deterministic_matrix ? 1 : 0) << ',' << (r.covariance_regularized ? 1 : 0)
       << ',' << (r.failed ? 1 : 0);
  return line.str();
}

namespace detail {

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

/// Write one report (or a list) as JSON or CSV; both formats end with a
/// trailing newline, CSV carries the fixed header row.
inline void emit_report(std::span<const BenchReport> reports, const std::string& format,
                        const std::string& path) {
  if (format == "json") {
    json j;
    if (reports.size() == 1) {
      j = report_to_json(reports.front());
    } else {
      j = json::array();
      for (const auto& r : reports) j.push_back(report_to_json(r));
    }
    detail::write_text_file(path, j.dump(2) + "\n");
    return;
  }
  if (format == "csv") {
    std::ostringstream text;
    const auto& header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i)
      text << header[i] << (i + 1 < header.size() ? "," : "");
    text << '\n';
    for (const auto& r : reports) text << report_to_csv_row(r) << '\n';
    detail::write_text_file(path, text.str());
    return;
  }
  throw validation_error("emit_report: format must be json or csv");
}

inline void emit_report(const BenchReport& report, const std::string& format,
                        const std::string& path) {
  emit_report(std::span<const BenchReport>(&report, 1), format, path);
}

/// Grid summary: one row per cell in (component, matrix) order with ascending
/// ranks by kernel_mse and by attention_mean_rel (failed cells rank 0).
inline std::string grid_summary_csv(std::span<const BenchReport> reports) {
  std::vector<std::size_t> by_mse, by_attention;
  for (std::size_t i = 0; i < reports.size(); ++i)
    if (!reports[i].failed) {
      by_mse.push_back(i);
      by_attention.push_back(i);
    }
  std::stable_sort(by_mse.begin(), by_mse.end(), [&](std::size_t a, std::size_t b) {
    return reports[a].kernel_mse < reports[b].kernel_mse;
  });
  std::stable_sort(by_attention.begin(), by_attention.end(),
                   [&](std::size_t a, std::size_t b) {
                     return reports[a].attention_mean_rel < reports[b].attention_mean_rel;
                   });
  std::vector<std::size_t> mse_rank(reports.size(), 0), attn_rank(reports.size(), 0);
  for (std::size_t r = 0; r < by_mse.size(); ++r) mse_rank[by_mse[r]] = r + 1;
  for (std::size_t r = 0; r < by_attention.size(); ++r)
    attn_rank[by_attention[r]] = r + 1;

  std::ostringstream text;
  text << "component,matrix,kernel_mse,kernel_bias,estimator_variance,"
          "attention_max_row_l2,attention_mean_rel,wall_time_s,peak_bytes,"
          "degenerate_rows,failed,rank_kernel_mse,rank_attention_mean_rel\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    text << r.config.component << ',' << r.config.matrix << ','
         << detail::format_double(r.kernel_mse) << ','
         << detail::format_double(r.kernel_bias) << ','
         << detail::format_double(r.estimator_variance) << ','
         << detail::format_double(r.attention_max_row_l2) << ','
         << detail::format_double(r.attention_mean_rel) << ','
         << detail::format_double(r.wall_time_s) << ',' << r.peak_bytes << ','
         << r.degenerate_rows << ',' << (r.failed ? 1 : 0) << ',' << mse_rank[i] << ','
         << attn_rank[i] << '\n';
  }
  return text.str();
}

}  // namespace rfattn::bench
