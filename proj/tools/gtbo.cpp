#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <sstream>

#include "gtbo/cli.hpp"

using namespace gtbo;

namespace {

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("malformed sweep value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-testing Bayesian optimization experiments"};
  app.require_subcommand(1);

  std::string config_path, output_dir, results_dir, kind, axis, values;
  std::size_t jobs = 0;

  auto* run = app.add_subcommand("run", "Run every seed of a configuration");
  run->add_option("-c,--config", config_path, "YAML run configuration")->required();
  run->add_option("-o,--output-dir", output_dir, "Override output_dir");
  run->add_option("-j,--jobs", jobs, "Seeds run concurrently (0: all cores)");

  auto* sweep = app.add_subcommand("sweep", "Run a configuration over the values of one axis");
  sweep->add_option("-c,--config", config_path, "YAML run configuration")->required();
  sweep->add_option("-o,--output-dir", output_dir, "Override output_dir");
  sweep->add_option("-a,--axis", axis, "Override sweep.axis");
  sweep->add_option("-v,--values", values, "Override sweep.values (comma separated)");
  sweep->add_option("-j,--jobs", jobs, "Seeds run concurrently (0: all cores)");

  auto* plot = app.add_subcommand("plot", "Render SVG figures from a results directory");
  plot->add_option("-r,--results", results_dir, "Results directory")->required();
  plot->add_option("-k,--kind", kind, "marginals, regret, sensitivity or active_count")->required();

  auto* check = app.add_subcommand("validate-config", "Parse and validate a configuration");
  check->add_option("-c,--config", config_path, "YAML run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  try {
    if (*plot) {
      for (const auto& p : cli::plot(results_dir, cli::parse_plot_kind(kind))) std::cout << p.string() << '\n';
      return cli::kExitOk;
    }
    auto config = cli::load_config(config_path);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (run->count("--jobs") + sweep->count("--jobs") > 0) config.jobs = jobs;
    if (*check) {
      cli::validate(config);
      std::cout << "configuration is valid\n";
      return cli::kExitOk;
    }
    if (*sweep) {
      if (!axis.empty()) config.sweep.axis = cli::parse_sweep_axis(axis);
      if (!values.empty()) config.sweep.values = parse_values(values);
      return cli::run_sweep(config);
    }
    return cli::run_experiment(config);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitEvaluation;
  }
}
