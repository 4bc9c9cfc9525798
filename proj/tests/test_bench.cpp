#include <catch2/catch.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfattn/bench.hpp"

using namespace rfattn;
using rfattn::bench::BenchReport;
using rfattn::bench::RunConfig;

namespace {

RunConfig small_config() {
  RunConfig config;
  config.component = "posrf";
  config.matrix = "orf";
  config.num_features = 64;
  config.dim = 8;
  config.value_dim = 8;
  config.seq_len = 32;
  config.key_dim = 8;
  config.num_pairs = 32;
  config.num_rebuilds = 8;
  config.seed = 11;
  return config;
}

nlohmann::ordered_json comparable(const BenchReport& report) {
  auto j = rfattn::bench::report_to_json(report);
  j["wall_time_s"] = 0.0;
  j["peak_bytes"] = 0;
  return j;
}

}  // namespace

TEST_CASE("run_combination is deterministic apart from timing fields") {
  const auto config = small_config();
  const auto a = rfattn::bench::run_combination(config);
  const auto b = rfattn::bench::run_combination(config);
  REQUIRE(comparable(a).dump() == comparable(b).dump());
  REQUIRE(a.kernel_mse >= a.kernel_bias * a.kernel_bias);
  REQUIRE(a.estimator_variance >= 0.0);
  REQUIRE(a.rebuilds_used == config.num_rebuilds);
}

TEST_CASE("run_combination stays within a desk-scale time budget") {
  RunConfig config = small_config();
  config.num_features = 128;
  config.dim = 16;
  config.key_dim = 16;
  config.seq_len = 64;
  config.num_rebuilds = 20;
  const auto report = rfattn::bench::run_combination(config);
  REQUIRE(report.wall_time_s < 10.0);
  REQUIRE(report.degenerate_rows == 0);
}

TEST_CASE("deterministic matrices are reported with a single rebuild") {
  for (const char* matrix : {"qmc", "mm", "sgq"}) {
    RunConfig config = small_config();
    config.matrix = matrix;
    config.num_features = 16;  // >= dim + 1 for mm
    const auto report = rfattn::bench::run_combination(config);
    REQUIRE(report.deterministic_matrix);
    REQUIRE(report.rebuilds_used == 1);
    REQUIRE(report.estimator_variance == 0.0);
  }
}

TEST_CASE("doubling features does not hurt kernel mse in most seeds") {
  int non_increasing = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    RunConfig narrow = small_config();
    narrow.component = "oprf";
    narrow.num_features = 128;
    narrow.num_pairs = 32;
    narrow.num_rebuilds = 10;
    narrow.seed = 2000 + seed;
    RunConfig wide = narrow;
    wide.num_features = 256;
    const auto mse_narrow = rfattn::bench::run_combination(narrow).kernel_mse;
    const auto mse_wide = rfattn::bench::run_combination(wide).kernel_mse;
    if (mse_wide <= mse_narrow) ++non_increasing;
  }
  REQUIRE(non_increasing >= seeds * 8 / 10);
}

TEST_CASE("invalid configurations are rejected") {
  RunConfig bad_component = small_config();
  bad_component.component = "softmax";
  REQUIRE_THROWS_AS(rfattn::bench::run_combination(bad_component), validation_error);

  RunConfig bad_matrix = small_config();
  bad_matrix.matrix = "dense";
  REQUIRE_THROWS_AS(rfattn::bench::run_combination(bad_matrix), validation_error);

  RunConfig zero_pairs = small_config();
  zero_pairs.num_pairs = 0;
  REQUIRE_THROWS_AS(rfattn::bench::run_combination(zero_pairs), validation_error);

  RunConfig bad_sigma = small_config();
  bad_sigma.sigma = -1.0;
  REQUIRE_THROWS_AS(rfattn::bench::run_combination(bad_sigma), validation_error);
}

TEST_CASE("default grid covers the eighteen combinations") {
  RunConfig base = small_config();
  base.num_features = 32;
  base.num_pairs = 16;
  base.num_rebuilds = 3;
  base.seq_len = 16;
  const auto reports = rfattn::bench::run_grid(base, {}, {});
  REQUIRE(reports.size() == 18);
  for (const auto& report : reports) {
    INFO(report.config.component << "-" << report.config.matrix << ": "
                                 << report.error);
    REQUIRE_FALSE(report.failed);
  }

  // Cells arrive sorted by (component, matrix) with their cell index echoed.
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto key = [](const BenchReport& r) {
      return r.config.component + "\x01" + r.config.matrix;
    };
    REQUIRE(key(reports[i - 1]) < key(reports[i]));
    REQUIRE(reports[i].config.build_salt == i);
  }

  // A single-cell grid equals the plain run with the same salt.
  RunConfig single = base;
  single.component = "posrf";
  single.matrix = "qmc";
  single.build_salt = 0;
  const auto cell = rfattn::bench::run_grid(base, {"posrf"}, {"qmc"});
  REQUIRE(cell.size() == 1);
  REQUIRE(comparable(cell.front()).dump() ==
          comparable(rfattn::bench::run_combination(single)).dump());
}

TEST_CASE("grid cells share data so a failed cell does not poison others") {
  RunConfig base = small_config();
  base.num_features = 8;  // mm needs s >= d + 1 = 9, so that cell fails
  base.num_pairs = 8;
  base.num_rebuilds = 2;
  base.seq_len = 8;
  const auto reports = rfattn::bench::run_grid(base, {"posrf"}, {"mm", "qmc"});
  REQUIRE(reports.size() == 2);
  REQUIRE(reports[0].config.matrix == "mm");
  REQUIRE(reports[0].failed);
  REQUIRE_FALSE(reports[0].error.empty());
  REQUIRE_FALSE(reports[1].failed);
}

TEST_CASE("orf cells show lower estimator variance than a base reference") {
  // The variance-reduction claim is about the shift-invariant trigonometric
  // estimator; positive estimators at small d are a near coin flip.
  int wins = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    RunConfig config = small_config();
    config.component = "trigrf";
    config.num_rebuilds = 30;
    config.seed = 3000 + seed;
    config.matrix = "orf";
    const double var_orf = rfattn::bench::run_combination(config).estimator_variance;
    config.matrix = "base";
    const double var_base = rfattn::bench::run_combination(config).estimator_variance;
    if (var_orf <= var_base) ++wins;
  }
  REQUIRE(wins >= 8);
}

TEST_CASE("grid reproducibility across thread counts") {
  RunConfig base = small_config();
  base.num_features = 16;
  base.num_pairs = 8;
  base.num_rebuilds = 2;
  base.seq_len = 8;
  const auto serial = rfattn::bench::run_grid(base, {"posrf", "oprf"}, {"qmc", "orf"}, 1);
  const auto parallel =
      rfattn::bench::run_grid(base, {"posrf", "oprf"}, {"qmc", "orf"}, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i)
    REQUIRE(comparable(serial[i]).dump() == comparable(parallel[i]).dump());
}

TEST_CASE("fastfood fit trace") {
  RunConfig config = small_config();
  config.matrix = "fastfood_l";
  config.num_features = 16;
  config.dim = 8;
  config.num_pairs = 16;

  const auto zero_steps = rfattn::bench::fit_fastfood_learner(config, 2.0, 0, 0.5);
  REQUIRE(zero_steps.loss.size() == 1);
  REQUIRE_FALSE(zero_steps.failed);

  // Fitting the bandwidth the matrix was built with: already near the floor.
  const auto control = rfattn::bench::fit_fastfood_learner(config, 1.0, 20, 0.2);
  REQUIRE(control.loss.size() == 21);
  REQUIRE(control.loss.back() > control.loss.front() / 2.0);

  RunConfig not_learner = config;
  not_learner.matrix = "fastfood_f";
  REQUIRE_THROWS_AS(rfattn::bench::fit_fastfood_learner(not_learner, 2.0, 1, 0.1),
                    validation_error);
}

TEST_CASE("report serialization round trips") {
  const auto report = rfattn::bench::run_combination(small_config());
  const auto dir = std::filesystem::temp_directory_path() / "rfattn_test_reports";
  std::filesystem::create_directories(dir);

  const auto json_path = (dir / "report.json").string();
  rfattn::bench::emit_report(report, "json", json_path);
  std::ifstream in(json_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  REQUIRE(!text.empty());
  REQUIRE(text.back() == '\n');
  const auto parsed = nlohmann::ordered_json::parse(text);
  REQUIRE(parsed["kernel_mse"].get<double>() == report.kernel_mse);
  REQUIRE(parsed["kernel_bias"].get<double>() == report.kernel_bias);
  REQUIRE(parsed["estimator_variance"].get<double>() == report.estimator_variance);
  REQUIRE(parsed["config"]["seed"].get<std::uint64_t>() == report.config.seed);

  const auto csv_path = (dir / "report.csv").string();
  std::vector<BenchReport> reports = {report, report};
  rfattn::bench::emit_report(reports, "csv", csv_path);
  std::ifstream csv_in(csv_path);
  std::string line;
  std::size_t lines = 0;
  std::string header;
  while (std::getline(csv_in, line)) {
    if (lines == 0) header = line;
    ++lines;
  }
  REQUIRE(lines == reports.size() + 1);
  REQUIRE(header.rfind("component,matrix,", 0) == 0);

  std::filesystem::remove_all(dir);
}

TEST_CASE("grid summary ranks cells") {
  RunConfig base = small_config();
  base.num_features = 16;
  base.num_pairs = 8;
  base.num_rebuilds = 2;
  base.seq_len = 8;
  const auto reports = rfattn::bench::run_grid(base, {"posrf"}, {"qmc", "orf"});
  const auto csv = rfattn::bench::grid_summary_csv(reports);
  REQUIRE(csv.back() == '\n');

  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line.rfind("component,matrix,", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  REQUIRE(rows == reports.size());
}
