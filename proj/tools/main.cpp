#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hotspot/experiment.hpp"

namespace {

struct Common {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> jobs;
  std::string out;
  std::string models;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Config file path or 'default'");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--runs", c.runs, "Number of runs")->check(CLI::PositiveNumber);
  cmd->add_option("--jobs", c.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--models", c.models, "Model variants, e.g. S1,S2,M2");
}

hotspot::ExperimentConfig build_config(const Common& c) {
  hotspot::ExperimentConfig config = hotspot::ExperimentConfig::load(c.config);
  if (c.seed) config.sim.seed = *c.seed;
  if (c.runs) config.runs = *c.runs;
  if (c.jobs) config.jobs = *c.jobs;
  if (!c.out.empty()) config.output_dir = c.out;
  if (!c.models.empty()) {
    try {
      config.models = hotspot::parse_variants(c.models);
    } catch (const std::invalid_argument& e) {
      throw hotspot::ConfigError(e.what());
    }
  }
  config.validate();
  return config;
}

void log_line(const std::string& line) { std::cerr << line << std::endl; }

int execute(const std::string& command, const Common& common) {
  const hotspot::ExperimentConfig config = build_config(common);
  hotspot::RunOptions run;
  hotspot::OutputOptions out;
  out.metrics = false;
  out.fits = false;
  if (command == "simulate") {
    run.until = hotspot::Stage::simulate;
    run.sanity = true;
    out.sanity = true;
    out.datasets = true;
  } else if (command == "fit") {
    run.until = hotspot::Stage::fit;
    out.fits = true;
  } else if (command == "evaluate") {
    out.metrics = true;
    out.fits = true;
  } else if (command == "all") {
    run.sanity = true;
    out.metrics = out.fits = out.sanity = true;
    out.datasets = config.dump_datasets;
  } else if (command == "sanity") {
    run.until = hotspot::Stage::simulate;
    run.sanity = true;
    out.sanity = true;
  }
  out.predictions = config.dump_predictions && run.until == hotspot::Stage::evaluate;
  hotspot::ExperimentConfig effective = config;
  effective.dump_datasets = out.datasets;

  const auto result = hotspot::run_experiment(effective, run, log_line);
  const auto dir = hotspot::resolve_output_dir(config);
  const auto files = hotspot::write_outputs(result, dir, out);
  for (const auto& f : files) std::cout << (dir / f).string() << '\n';

  if (command == "sanity") {
    std::cout << std::left << std::setw(22) << "district" << std::right << std::setw(12)
              << "simulated" << std::setw(12) << "integral" << std::setw(12) << "survey"
              << std::setw(10) << "rel.err" << '\n';
    for (const auto& row : hotspot::average_sanity(result)) {
      std::cout << std::left << std::setw(22) << row.name << std::right << std::fixed
                << std::setprecision(4) << std::setw(12) << row.simulated << std::setw(12)
                << row.integral << std::setw(12) << row.survey << std::setprecision(3)
                << std::setw(9) << 100.0 * (row.simulated - row.survey) / row.survey << "%\n";
    }
  }
  if (result.failed() == result.runs.size()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation study of hot-spot prediction under differential crime reporting"};
  app.require_subcommand(1);
  Common common;
  std::string chosen;
  for (const char* name : {"simulate", "fit", "evaluate", "all", "sanity"}) {
    const char* help = std::string(name) == "simulate" ? "Simulate datasets and write events"
                       : std::string(name) == "fit"    ? "Simulate and fit all model variants"
                       : std::string(name) == "evaluate"
                           ? "Fit and evaluate; write metric tables"
                       : std::string(name) == "all" ? "Run the full study and write every table"
                                                    : "Per-district sanity table of the simulator";
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    cmd->callback([&chosen, cmd] { chosen = cmd->get_name(); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return execute(chosen, common);
  } catch (const hotspot::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
