#include <array>
#include <catch2/catch.hpp>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "rfattn/feature_map.hpp"
#include "rfattn/kernels.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/weight_matrix.hpp"

using namespace rfattn;

namespace {

WeightMatrixSpec spec_of(WeightFamily family, std::size_t s, std::size_t d,
                         double sigma = 1.0, std::uint64_t seed = 42) {
  WeightMatrixSpec spec;
  spec.family = family;
  spec.num_features = s;
  spec.dim = d;
  spec.sigma = sigma;
  spec.seed = seed;
  return spec;
}

double entry(const WeightMatrix& wm, std::size_t i, std::size_t j) {
  return wm.rows()(i, j);
}

// Mean squared error of the paired trigonometric kernel estimate against the
// RBF over a fixed pair set.
double trig_kernel_mse(const WeightMatrix& wm, const DenseMatrix& xs,
                       const DenseMatrix& ys, double sigma) {
  double acc = 0.0;
  for (std::size_t p = 0; p < xs.rows(); ++p) {
    const auto zx = wm.matvec(xs.row(p));
    const auto zy = wm.matvec(ys.row(p));
    double est = 0.0;
    for (std::size_t i = 0; i < zx.size(); ++i) est += std::cos(zx[i] - zy[i]);
    est /= static_cast<double>(zx.size());
    const double err = est - rbf_kernel(xs.row(p), ys.row(p), sigma);
    acc += err * err;
  }
  return acc / static_cast<double>(xs.rows());
}

DenseMatrix random_rows(RngStream& rng, std::size_t n, std::size_t d, double scale) {
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = rng.next_gaussian() * scale;
  return out;
}

}  // namespace

TEST_CASE("base matrix sampling") {
  const auto wm = build_base(spec_of(WeightFamily::kBase, 1000, 1000));
  double mean = 0.0;
  for (std::size_t i = 0; i < wm.rows().size(); ++i) mean += wm.rows().data()[i];
  mean /= static_cast<double>(wm.rows().size());
  REQUIRE(std::abs(mean) < 4e-3);

  const auto narrow = build_base(spec_of(WeightFamily::kBase, 8, 4, 1.0, 9));
  const auto wide = build_base(spec_of(WeightFamily::kBase, 8, 4, 2.0, 9));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(entry(wide, i, j) == 0.5 * entry(narrow, i, j));

  // Growing s with a fixed seed extends the matrix.
  const auto longer = build_base(spec_of(WeightFamily::kBase, 16, 4, 1.0, 9));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(entry(longer, i, j) == entry(narrow, i, j));

  REQUIRE_THROWS_AS(build_base(spec_of(WeightFamily::kBase, 0, 4)), validation_error);
  auto bad = spec_of(WeightFamily::kBase, 4, 4);
  bad.sigma = 0.0;
  REQUIRE_THROWS_AS(build_base(bad), validation_error);
}

TEST_CASE("orf blocks are orthogonal with chi-distributed row norms") {
  const double sigma = 1.5;
  const std::size_t d = 16;
  const auto wm = build_orf(spec_of(WeightFamily::kOrf, 2 * d, d, sigma, 5));

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double cosine =
          dot(wm.rows().row(i), wm.rows().row(j)) /
          std::sqrt(wm.row_squared_norm(i) * wm.row_squared_norm(j));
      REQUIRE(std::abs(cosine) < 1e-8);
    }

  const auto big = build_orf(spec_of(WeightFamily::kOrf, 10'000, d, sigma, 6));
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < big.num_features(); ++i)
    mean_sq += big.row_squared_norm(i) * sigma * sigma;
  mean_sq /= static_cast<double>(big.num_features());
  REQUIRE(mean_sq == Approx(static_cast<double>(d)).epsilon(0.02));
}

TEST_CASE("orf marginal entries match base sampling") {
  const std::size_t d = 16;
  const double sigma = 2.0;
  const auto wm = build_orf(spec_of(WeightFamily::kOrf, 100'000, d, sigma, 7));
  double var = 0.0;
  for (std::size_t i = 0; i < wm.num_features(); ++i)
    var += wm.row_squared_norm(i);
  var /= static_cast<double>(wm.num_features() * d);
  REQUIRE(var == Approx(1.0 / (sigma * sigma)).epsilon(0.02));
}

TEST_CASE("block families keep earlier features as s grows") {
  for (auto family :
       {WeightFamily::kOrf, WeightFamily::kSorf, WeightFamily::kFastFoodFixed}) {
    const std::size_t d = 16;
    const auto small = build_weight_matrix(spec_of(family, d, d, 1.0, 11));
    const auto large = build_weight_matrix(spec_of(family, 2 * d, d, 1.0, 11));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        REQUIRE(entry(small, i, j) == entry(large, i, j));
  }
}

TEST_CASE("block independence across stacked blocks") {
  // Entry-level correlation between block 0 and block 1 over rebuilds.
  const std::size_t d = 8;
  const int rebuilds = 4000;
  double sum_a = 0.0, sum_b = 0.0, sum_ab = 0.0, sum_a2 = 0.0, sum_b2 = 0.0;
  for (int r = 0; r < rebuilds; ++r) {
    const auto wm = build_orf(spec_of(WeightFamily::kOrf, 2 * d, d, 1.0, 1000 + r));
    const double a = entry(wm, 0, 0);
    const double b = entry(wm, d, 0);
    sum_a += a;
    sum_b += b;
    sum_ab += a * b;
    sum_a2 += a * a;
    sum_b2 += b * b;
  }
  const double n = rebuilds;
  const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
  const double corr = cov / std::sqrt((sum_a2 / n - (sum_a / n) * (sum_a / n)) *
                                      (sum_b2 / n - (sum_b / n) * (sum_b / n)));
  REQUIRE(std::abs(corr) < 0.08);  // ~5 sigma for independent entries
}

TEST_CASE("sorf structure") {
  const double sigma = 1.25;
  for (std::size_t dp : {8u, 16u, 32u, 64u}) {
    const auto wm = build_sorf(spec_of(WeightFamily::kSorf, dp, dp, sigma, 21));
    REQUIRE(wm.padded_dim() == dp);

    RngStream rng(77);
    const auto x = gaussian(rng, dp);
    const auto fast = wm.matvec(x);
    const auto direct = wm.explicit_matvec(x);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i)
      max_rel = std::max(max_rel, std::abs(fast[i] - direct[i]) /
                                      std::max(1.0, std::abs(direct[i])));
    REQUIRE(max_rel < 1e-10);

    const double want = std::sqrt(static_cast<double>(dp)) / sigma;
    for (std::size_t i = 0; i < dp; ++i)
      REQUIRE(std::sqrt(wm.row_squared_norm(i)) == Approx(want).margin(1e-10));
  }
}

TEST_CASE("sorf pads non-power-of-two dimensions") {
  const auto wm = build_sorf(spec_of(WeightFamily::kSorf, 12, 6, 1.0, 22));
  REQUIRE(wm.padded_dim() == 8);
  REQUIRE(wm.dim() == 6);
  REQUIRE(wm.num_features() == 12);
  RngStream rng(78);
  const auto x = gaussian(rng, 6);
  const auto fast = wm.matvec(x);
  const auto direct = wm.explicit_matvec(x);
  for (std::size_t i = 0; i < fast.size(); ++i)
    REQUIRE(fast[i] == Approx(direct[i]).margin(1e-10));
}

TEST_CASE("sorf implicit matvec scales near d log d") {
  auto time_matvec = [](std::size_t dp) {
    std::array<std::vector<double>, 3> diagonals;
    RngStream rng(31);
    for (auto& diag : diagonals) diag = rademacher(rng, dp);
    std::vector<double> x(dp, 1.0), out(dp);
    // Warm up, then take the best of several timed batches.
    detail::sorf_block_matvec(diagonals, 1.0, x, out);
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int iter = 0; iter < 40; ++iter)
        detail::sorf_block_matvec(diagonals, 1.0, x, out);
      best = std::min(best, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
    }
    return best;
  };
  const double t1024 = time_matvec(1024);
  const double t4096 = time_matvec(4096);
  REQUIRE(t4096 / t1024 < 6.0);  // quadratic scaling would give ~16x
}

TEST_CASE("qmc rows are deterministic inverse-cdf halton points") {
  const auto a = build_qmc(spec_of(WeightFamily::kQmc, 32, 5, 1.0, 1));
  const auto b = build_qmc(spec_of(WeightFamily::kQmc, 32, 5, 1.0, 99));
  REQUIRE(a.rows() == b.rows());  // seed-independent
  REQUIRE(a.metadata().deterministic);

  const auto one_d = build_qmc(spec_of(WeightFamily::kQmc, 3, 1));
  REQUIRE(entry(one_d, 0, 0) == Approx(0.0).margin(1e-4));
  REQUIRE(entry(one_d, 1, 0) == Approx(-0.6745).margin(1e-4));
  REQUIRE(entry(one_d, 2, 0) == Approx(0.6745).margin(1e-4));

  REQUIRE_THROWS_AS(build_qmc(spec_of(WeightFamily::kQmc, 2, 4097)), capacity_error);
}

TEST_CASE("qmc beats base sampling on trig kernel mse") {
  const std::size_t s = 128, d = 8;
  RngStream rng(123);
  const double scale = std::pow(static_cast<double>(d), -0.25);
  const auto xs = random_rows(rng, 200, d, scale);
  const auto ys = random_rows(rng, 200, d, scale);

  const double qmc_mse =
      trig_kernel_mse(build_qmc(spec_of(WeightFamily::kQmc, s, d)), xs, ys, 1.0);
  double base_mse = 0.0;
  const int rebuilds = 20;
  for (int r = 0; r < rebuilds; ++r)
    base_mse += trig_kernel_mse(
        build_base(spec_of(WeightFamily::kBase, s, d, 1.0, 500 + r)), xs, ys, 1.0);
  base_mse /= rebuilds;
  REQUIRE(qmc_mse <= base_mse);
}

TEST_CASE("mm whitening") {
  const double sigma = 2.0;
  const std::size_t s = 64, d = 6;
  const auto wm = build_mm(spec_of(WeightFamily::kMm, s, d, sigma));
  REQUIRE(wm.metadata().deterministic);

  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < s; ++i) mean += entry(wm, i, j);
    REQUIRE(std::abs(mean / s) < 1e-10);
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < s; ++i) cov += entry(wm, i, a) * entry(wm, i, b);
      cov /= static_cast<double>(s - 1);
      const double want = a == b ? 1.0 / (sigma * sigma) : 0.0;
      REQUIRE(cov == Approx(want).margin(1e-8));
    }

  REQUIRE_THROWS_AS(build_mm(spec_of(WeightFamily::kMm, 6, 6)), validation_error);
}

TEST_CASE("mm in one dimension standardizes the qmc points") {
  const std::size_t s = 16;
  const auto mm = build_mm(spec_of(WeightFamily::kMm, s, 1));
  const auto qmc = build_qmc(spec_of(WeightFamily::kQmc, s, 1));
  double mean = 0.0;
  for (std::size_t i = 0; i < s; ++i) mean += entry(qmc, i, 0);
  mean /= s;
  double var = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    var += (entry(qmc, i, 0) - mean) * (entry(qmc, i, 0) - mean);
  var /= s - 1;
  for (std::size_t i = 0; i < s; ++i)
    REQUIRE(entry(mm, i, 0) ==
            Approx((entry(qmc, i, 0) - mean) / std::sqrt(var)).margin(1e-12));
}

TEST_CASE("sgq base block") {
  const std::size_t d = 5;
  const auto wm = build_sgq(spec_of(WeightFamily::kSgq, 2 * d + 1, d));
  const double node = std::sqrt(3.0);

  // One zero row, then one +node e_i and one -node e_i per axis.
  for (std::size_t j = 0; j < d; ++j) REQUIRE(entry(wm, 0, j) == 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      REQUIRE(entry(wm, 1 + i, j) == Approx(i == j ? node : 0.0));
      REQUIRE(entry(wm, 1 + d + i, j) == Approx(i == j ? -node : 0.0));
    }
  }

  // Negation symmetry of the full row set.
  for (std::size_t i = 0; i < wm.num_features(); ++i) {
    bool found = false;
    for (std::size_t k = 0; k < wm.num_features() && !found; ++k) {
      bool match = true;
      for (std::size_t j = 0; j < d; ++j)
        if (entry(wm, i, j) != -entry(wm, k, j)) {
          match = false;
          break;
        }
      found = match;
    }
    REQUIRE(found);
  }

  // Third-degree rule: the node solves the moment equations for N(0,1).
  const SgqConfig config = *wm.sgq();
  REQUIRE(config.weight_center + 2.0 * config.weight_side == Approx(1.0));
  REQUIRE(2.0 * config.weight_side * config.node * config.node == Approx(1.0));
  REQUIRE(config.node == Approx(std::sqrt(1.0 / (2.0 * config.weight_side))));
}

TEST_CASE("sgq tiling randomizes copies and truncates") {
  const std::size_t d = 4, s = 21;  // 2d+1 = 9, so three copies with truncation
  const auto wm = build_sgq(spec_of(WeightFamily::kSgq, s, d, 1.0, 77));
  REQUIRE(wm.num_features() == s);
  const double node = std::sqrt(3.0);
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < s; ++i) {
    const double norm = std::sqrt(wm.row_squared_norm(i));
    if (norm == 0.0) {
      ++zero_rows;
    } else {
      REQUIRE(norm == Approx(node).margin(1e-12));
    }
  }
  REQUIRE(zero_rows == 3);
}

TEST_CASE("fastfood structure") {
  const double sigma = 1.5;
  for (std::size_t dp : {8u, 16u, 32u, 64u}) {
    const auto wm =
        build_fastfood(spec_of(WeightFamily::kFastFoodFixed, dp, dp, sigma, 33));
    RngStream rng(41);
    const auto x = gaussian(rng, dp);
    const auto fast = wm.matvec(x);
    const auto direct = wm.explicit_matvec(x);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i)
      max_rel = std::max(max_rel, std::abs(fast[i] - direct[i]) /
                                      std::max(1.0, std::abs(direct[i])));
    REQUIRE(max_rel < 1e-10);

    const std::vector<double> zero(dp, 0.0);
    for (double v : wm.matvec(zero)) REQUIRE(v == 0.0);
  }
}

TEST_CASE("fastfood rows have gaussian-scale norms") {
  const std::size_t dp = 16;
  const auto wm =
      build_fastfood(spec_of(WeightFamily::kFastFoodFixed, 10'000, dp, 1.0, 34));
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < wm.num_features(); ++i)
    mean_sq += wm.row_squared_norm(i);
  mean_sq /= static_cast<double>(wm.num_features());
  REQUIRE(mean_sq == Approx(static_cast<double>(dp)).epsilon(0.03));
}

TEST_CASE("fastfood learnable validation") {
  auto fixed = spec_of(WeightFamily::kFastFoodFixed, 8, 8);
  fixed.learnable = {FastFoodDiagonal::kScale};
  REQUIRE_THROWS_AS(build_fastfood(fixed), validation_error);

  auto learner = spec_of(WeightFamily::kFastFoodLearnable, 8, 8);
  learner.learnable = {FastFoodDiagonal::kScale};
  const auto wm = build_fastfood(learner);
  REQUIRE(wm.fastfood()->is_learnable(FastFoodDiagonal::kScale));
  REQUIRE_FALSE(wm.fastfood()->is_learnable(FastFoodDiagonal::kGauss));
}

TEST_CASE("fastfood update steps the learnable diagonals") {
  auto spec = spec_of(WeightFamily::kFastFoodLearnable, 8, 8, 1.0, 55);
  spec.learnable = {FastFoodDiagonal::kScale};
  const auto params = *build_fastfood(spec).fastfood();

  FastFoodGrads zero_grads;
  zero_grads.blocks.resize(params.blocks.size());
  const auto unchanged = fastfood_update(params, zero_grads, 0.1);
  REQUIRE(unchanged.blocks[0].scale == params.blocks[0].scale);

  FastFoodGrads grads;
  grads.blocks.resize(params.blocks.size());
  grads.blocks[0].scale = params.blocks[0].scale;
  const double step = 0.25;
  const auto stepped = fastfood_update(params, grads, step);
  for (std::size_t i = 0; i < stepped.blocks[0].scale.size(); ++i)
    REQUIRE(stepped.blocks[0].scale[i] ==
            Approx((1.0 - step) * params.blocks[0].scale[i]));

  // Gradient on a frozen diagonal is a contract violation.
  FastFoodGrads frozen;
  frozen.blocks.resize(params.blocks.size());
  frozen.blocks[0].gauss.assign(params.blocks[0].gauss.size(), 1.0);
  REQUIRE_THROWS_AS(fastfood_update(params, frozen, 0.1), validation_error);

  // Scale entries stay clamped above zero.
  FastFoodGrads huge;
  huge.blocks.resize(params.blocks.size());
  huge.blocks[0].scale.assign(params.blocks[0].scale.size(), 1e12);
  const auto clamped = fastfood_update(params, huge, 1.0);
  for (double v : clamped.blocks[0].scale) REQUIRE(v == 1e-8);
}
