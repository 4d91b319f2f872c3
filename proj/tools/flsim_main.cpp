// Command-line front end: validate configs, run analytic bound sweeps,
// calibrate the gap constants, run seeded training experiments and emit
// plot-ready data files.
//
// Exit codes: 0 success, 2 validation error, 3 divergent regime, 1 other.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flsim/flsim.hpp"

namespace {

std::string resolve_output_dir(const flsim::harness::ExperimentSpec& spec,
                               const std::string& cli_override) {
  if (!cli_override.empty()) return cli_override;
  if (const char* env = std::getenv("FLSIM_OUTPUT_DIR")) {
    if (*env) return env;
  }
  return spec.output_dir;
}

int run_validate(const std::string& config_path) {
  const auto spec = flsim::harness::load_config(config_path);
  std::cout << "OK " << spec.name << " (hash " << spec.config_hash << ")\n"
            << "  users=" << spec.net.num_users << " bandwidth_hz=" << spec.net.bandwidth_hz
            << " seeds=" << spec.seeds.size() << " agents=" << spec.agents.size()
            << " sweep=" << spec.sweep.name << "\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_override) {
  const auto spec = flsim::harness::load_config(config_path);
  const auto table = flsim::harness::run_bound_sweep(spec);
  const std::string out_dir = resolve_output_dir(spec, out_override);
  flsim::harness::write_sweep_output(spec, table, out_dir);
  std::cout << "wrote " << table.rows.size() << " sweep rows to " << out_dir << "/sweep.csv\n";
  return 0;
}

int run_calibrate(const std::string& config_path, const std::string& targets_path,
                  const std::string& apply_path) {
  const auto spec = flsim::harness::load_config(config_path);
  const auto targets = flsim::harness::read_targets_csv(targets_path);
  const auto result = flsim::harness::calibrate_gap_constants(targets, spec);
  std::cout << "c0 = " << result.c0 << "\n"
            << "c1 = " << result.c1 << "\n";
  for (std::size_t i = 0; i < result.residuals.size(); ++i)
    std::cout << "residual[" << i << "] = " << result.residuals[i] << "\n";
  if (!apply_path.empty()) {
    std::ifstream is(config_path);
    nlohmann::json root = nlohmann::json::parse(is);
    root["gap"]["c0"] = result.c0;
    root["gap"]["c1"] = result.c1;
    std::ofstream os(apply_path);
    os << root.dump(2) << "\n";
    std::cout << "wrote calibrated config to " << apply_path << "\n";
  }
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_override, int jobs) {
  const auto spec = flsim::harness::load_config(config_path);
  const auto out = flsim::harness::run_training(spec, jobs);
  const std::string out_dir = resolve_output_dir(spec, out_override);
  flsim::harness::write_training_output(spec, out, out_dir);
  std::cout << "wrote " << out.records.size() << " episode records to " << out_dir
            << "/records.csv\n";
  return 0;
}

int run_plot_data(const std::string& dir, const std::string& kind) {
  const auto files = flsim::harness::emit_plot_data(dir, flsim::harness::parse_plot_kind(kind));
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware federated-learning simulator and resource-allocation trainer"};
  app.require_subcommand(1);

  std::string config_path, out_override, targets_path, apply_path, plot_dir, plot_kind;
  int jobs = 2;

  auto* validate = app.add_subcommand("validate", "Load and validate a config");
  validate->add_option("config", config_path, "config JSON path")->required();

  auto* sweep = app.add_subcommand("sweep", "Run the analytic iteration-bound sweep");
  sweep->add_option("config", config_path, "config JSON path")->required();
  sweep->add_option("--out", out_override, "output directory override");

  auto* calibrate = app.add_subcommand("calibrate", "Fit gap constants c0, c1 to target points");
  calibrate->add_option("config", config_path, "config JSON path")->required();
  calibrate->add_option("--targets", targets_path, "CSV of k,i_glob target rows")->required();
  calibrate->add_option("--apply", apply_path, "write a config copy with the fitted constants");

  auto* train = app.add_subcommand("train", "Run seeded training experiments");
  train->add_option("config", config_path, "config JSON path")->required();
  train->add_option("--out", out_override, "output directory override");
  train->add_option("--jobs", jobs, "parallel runs (default 2)");

  auto* plot = app.add_subcommand("plot-data", "Emit plot-ready series files from run outputs");
  plot->add_option("dir", plot_dir, "directory holding records.csv / sweep.csv")->required();
  plot->add_option("--kind", plot_kind, "reward_curve|energy_vs_pmax|iteration_sweep")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return run_validate(config_path);
    if (sweep->parsed()) return run_sweep(config_path, out_override);
    if (calibrate->parsed()) return run_calibrate(config_path, targets_path, apply_path);
    if (train->parsed()) return run_train(config_path, out_override, jobs);
    if (plot->parsed()) return run_plot_data(plot_dir, plot_kind);
  } catch (const flsim::DivergentRegimeError& e) {
    std::cerr << "divergent regime: " << e.what() << "\n";
    return 3;
  } catch (const flsim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
