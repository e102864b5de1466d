#pragma once

// The full study: independent simulation runs, each fitting the six model
// variants on the training window and scoring their daily hot spots over the
// evaluation window, followed by aggregation into the output tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspot/districts.hpp"
#include "hotspot/em.hpp"
#include "hotspot/metrics.hpp"
#include "hotspot/predictors.hpp"
#include "hotspot/simulator.hpp"

namespace hotspot {

/// Unreadable or invalid configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  SimConfig sim;
  int hotspots = 50;
  int runs = 50;
  std::vector<ModelVariant> models = ModelVariant::all();
  std::vector<double> beta_grid = default_beta_grid();
  EmOptions em = default_em_options();
  /// "builtin:bogota" or a districts CSV path.
  std::string districts = "builtin:bogota";
  /// "voronoi" or a cell-to-district CSV path.
  std::string district_map = "voronoi";
  std::string output_dir;  // empty: $HOTSPOT_SIM_OUT, then "out"
  bool dump_predictions = false;
  bool dump_datasets = false;
  bool dump_fits = true;
  int jobs = 1;

  static EmOptions default_em_options();
  /// The packaged profile with every study constant.
  static ExperimentConfig defaults();
  /// "default" or a JSON file path; keys missing from the file keep their
  /// default values, unknown keys are rejected. Throws ConfigError.
  static ExperimentConfig load(const std::string& name_or_path);
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
  std::string to_json_text() const;

  void validate() const;
  int eval_start() const;  // first evaluation day
  int eval_days() const;
};

/// District table and map named by the configuration.
struct StudySetup {
  DistrictTable districts;
  DistrictMap map;
  double total_rate = 0.0;
};
StudySetup prepare_setup(const ExperimentConfig& config);

struct SeppFit {
  std::string model;  // "S1" (true data) or "S2" (reported data; shared by S3)
  FitReport report;
};

struct BandwidthFit {
  std::string model;  // "M1" or "M2" (shared by M3)
  double beta = 0.0;
};

struct PredictionRow {
  std::string model;
  int day = 0;
  std::size_t cell = 0;
  double value = 0.0;
  bool hotspot = false;
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failed_stage;
  std::string error;

  std::size_t candidate_count = 0;
  std::size_t true_count = 0;
  std::size_t reported_count = 0;
  std::vector<SeppFit> sepp_fits;
  std::vector<BandwidthFit> bandwidths;
  std::vector<MetricRecord> records;
  std::vector<SanityRow> sanity;
  /// Per-cell sums over evaluation days of the true rates and of each
  /// model's predictions.
  std::vector<double> heat_true;
  std::map<std::string, std::vector<double>> heat_predicted;
  std::vector<PredictionRow> predictions;  // only with dump_predictions
  std::vector<Event> true_events;          // only with dump_datasets
  std::vector<std::uint8_t> reported_flag; // parallel to true_events
};

enum class Stage { simulate, fit, evaluate };

struct RunOptions {
  Stage until = Stage::evaluate;  // last stage to execute
  bool sanity = false;            // compute the per-district sanity table
};

/// One run: simulate, fit, evaluate. Errors are caught and reported in the
/// result with the stage that failed.
RunResult run_single(const ExperimentConfig& config, const StudySetup& setup,
                     int run_index, const RunOptions& options = {});

struct ExperimentResult {
  ExperimentConfig config;
  StudySetup setup;
  std::vector<RunResult> runs;  // by run index

  std::size_t failed() const;
  std::vector<MetricRecord> records() const;  // successful runs only
};

/// Runs config.runs independent runs using up to config.jobs threads. The
/// log callback receives one line per progress event.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {},
                                const std::function<void(const std::string&)>& log = {});

struct OutputOptions {
  bool metrics = true;
  bool fits = true;
  bool sanity = false;
  bool datasets = false;
  bool predictions = false;
};

/// Writes the tables and manifest.json into dir (created if needed).
/// Returns the written file names.
std::vector<std::string> write_outputs(const ExperimentResult& result,
                                       const std::filesystem::path& dir,
                                       const OutputOptions& options);

/// Output directory: config value, else $HOTSPOT_SIM_OUT, else "out".
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Per-district means of the sanity rows over successful runs.
std::vector<SanityRow> average_sanity(const ExperimentResult& result);

}  // namespace hotspot
