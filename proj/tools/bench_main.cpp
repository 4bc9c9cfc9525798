// Benchmark CLI: run one combination, sweep the full grid, or fit the
// learnable FastFood diagonals. Exit codes: 0 success, 1 validation error,
// 2 numeric failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfattn/alloc_tracker.hpp"
#include "rfattn/rfattn.hpp"

RFATTN_DEFINE_ALLOC_TRACKING

namespace {

void add_common_options(CLI::App* cmd, rfattn::bench::RunConfig& config) {
  cmd->add_option("--features", config.num_features, "Number of features s");
  cmd->add_option("--dim", config.dim, "Input dimension d");
  cmd->add_option("--dv", config.value_dim, "Value dimension d_v");
  cmd->add_option("--seq", config.seq_len, "Sequence length N");
  cmd->add_option("--sigma", config.sigma, "Bandwidth sigma");
  cmd->add_option("--dk", config.key_dim, "Key dimension d_k (defaults to --dim)");
  cmd->add_option("--pairs", config.num_pairs, "Evaluation pairs");
  cmd->add_option("--rebuilds", config.num_rebuilds, "Independent weight rebuilds");
  cmd->add_option("--seed", config.seed, "Base seed");
  cmd->add_option("--input-scale", config.input_scale, "Synthetic input scale");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      if (start < csv.size()) out.push_back(csv.substr(start));
      break;
    }
    if (comma > start) out.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-feature attention benchmark harness"};
  app.require_subcommand(1);

  rfattn::bench::RunConfig config;
  bool dk_given = false;

  auto* run = app.add_subcommand("run", "Run one component x matrix combination");
  run->add_option("--component", config.component,
                  "trigrf|posrf|posrf_hyp|gerf|oprf|saderf");
  run->add_option("--matrix", config.matrix,
                  "base|orf|sorf|qmc|mm|sgq|fastfood_f|fastfood_l");
  add_common_options(run, config);
  run->add_option("--gerf-a", config.gerf_a, "GERF parameter A");
  run->add_option("--gerf-sign", config.gerf_sign, "GERF sign (+1 or -1)");
  run->add_option("--learn", config.fastfood_learnable,
                  "FastFood learnable diagonals: s or sgb");
  run->add_option("--out", config.output_path, "Output path (stdout if omitted)");
  run->add_option("--format", config.format, "json|csv");
  run->callback([&] { dk_given = run->count("--dk") > 0; });

  std::string grid_out = "grid_out";
  std::string grid_components, grid_matrices;
  std::size_t grid_threads = 1;
  auto* grid = app.add_subcommand("grid", "Run the component x matrix grid");
  add_common_options(grid, config);
  grid->add_option("--out", grid_out, "Output directory");
  grid->add_option("--components", grid_components,
                   "Comma-separated component subset (default posrf,oprf,saderf)");
  grid->add_option("--matrices", grid_matrices,
                   "Comma-separated matrix subset (default orf,sorf,qmc,mm,sgq,fastfood_l)");
  grid->add_option("--threads", grid_threads, "Worker threads for grid cells");
  grid->callback([&] { dk_given = grid->count("--dk") > 0; });

  double target_sigma = 2.0;
  std::size_t fit_steps = 200;
  double fit_lr = 5.0;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit-fastfood",
                                 "Fit learnable FastFood diagonals to an RBF target");
  add_common_options(fit, config);
  fit->add_option("--target-sigma", target_sigma, "Target RBF bandwidth");
  fit->add_option("--steps", fit_steps, "Gradient steps");
  fit->add_option("--lr", fit_lr, "Step size");
  fit->add_option("--learn", config.fastfood_learnable, "s or sgb");
  fit->add_option("--out", fit_out, "Output path for the training trace (JSON)");
  fit->callback([&] { dk_given = fit->count("--dk") > 0; });

  CLI11_PARSE(app, argc, argv);
  if (!dk_given) config.key_dim = config.dim;

  try {
    if (run->parsed()) {
      const auto report = rfattn::bench::run_combination(config);
      if (config.output_path.empty()) {
        std::cout << rfattn::bench::report_to_json(report).dump(2) << "\n";
      } else {
        rfattn::bench::emit_report(report, config.format, config.output_path);
      }
      return 0;
    }
    if (grid->parsed()) {
      const auto reports = rfattn::bench::run_grid(
          config, split_list(grid_components), split_list(grid_matrices), grid_threads);
      std::filesystem::create_directories(grid_out);
      for (const auto& report : reports) {
        const auto path = std::filesystem::path(grid_out) /
                          (report.config.component + "_" + report.config.matrix + ".json");
        rfattn::bench::emit_report(report, "json", path.string());
      }
      rfattn::bench::detail::write_text_file(
          (std::filesystem::path(grid_out) / "summary.csv").string(),
          rfattn::bench::grid_summary_csv(reports));
      std::size_t failed = 0;
      for (const auto& report : reports) failed += report.failed ? 1 : 0;
      std::cout << reports.size() << " cells, " << failed << " failed, summary at "
                << grid_out << "/summary.csv\n";
      return failed == 0 ? 0 : 2;
    }
    if (fit->parsed()) {
      config.matrix = "fastfood_l";
      const auto trace =
          rfattn::bench::fit_fastfood_learner(config, target_sigma, fit_steps, fit_lr);
      nlohmann::ordered_json j;
      j["target_sigma"] = target_sigma;
      j["steps"] = fit_steps;
      j["step_size"] = fit_lr;
      j["loss"] = trace.loss;
      j["failed"] = trace.failed;
      const std::string text = j.dump(2) + "\n";
      if (fit_out.empty())
        std::cout << text;
      else
        rfattn::bench::detail::write_text_file(fit_out, text);
      std::cout << "initial loss " << trace.loss.front() << ", final loss "
                << trace.loss.back() << "\n";
      return 0;
    }
  } catch (const rfattn::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const rfattn::validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const rfattn::shape_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
