#pragma once

// Synthetic city crime data: branching simulation of a high-intensity SEPP
// with a Gaussian-mixture background, followed by district-wise binomial
// thinning into the true (victimization) and reported sets, plus the
// thinned-intensity ground truth used to define true hot spots.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspot/districts.hpp"
#include "hotspot/excitation.hpp"
#include "hotspot/model.hpp"
#include "hotspot/rng.hpp"

namespace hotspot {

/// Raised when the candidate process is too sparse for a district's target.
class GeneratorRateTooLow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorConfig {
  int centers = 14;
  double bandwidth = 2.0;        // km
  double center_jitter = 0.75;   // km, uniform per axis
  double total_rate = 0.0;       // events/day; 0 requests auto-calibration
  double offspring_mean = 0.3;   // m; theta is derived
  double omega = 0.2;            // 1/day
  double sigma_x = 0.1;          // km
  double sigma_y = 0.1;          // km
  double max_keep_prob = 0.9;    // calibration target for max_d p_d
  std::uint64_t layout_seed = 2021;
};

struct SimConfig {
  double width = 30.0;   // km
  double height = 29.0;  // km
  double cell_size = 1.0;
  double horizon = 2190.0;
  double burn_in = 500.0;
  double train_len = 1500.0;
  double eval_len = 189.0;
  double population_scale = 1.0 / 40.0;
  double time_factor = 12.0;
  double background_deviation = kBackgroundDeviationKm;
  std::uint64_t seed = 1;
  GeneratorConfig generator;

  void validate() const;
  SpatialDomain domain() const;
  /// Scaled population * victimization rate * time factor: expected number
  /// of true events in the district over the horizon.
  double target_count(const DistrictRecord& district) const;
  /// Scaled population * victimization rate / half-year length in days.
  double survey_daily_count(const DistrictRecord& district) const;
};

/// Centres of the generator mixture: a jittered Halton layout.
std::vector<MixtureBackground::Center> mixture_layout(const SimConfig& config);

/// Generator intensity with the given total background rate.
IntensityModel make_generator(const SimConfig& config, double total_rate);

// Events with a compile-time tag naming the data they were drawn from, so a
// pipeline typed for reported data cannot be handed the true set.
enum class DataSource { full, reported };

template <DataSource Source>
class SourcedEvents {
 public:
  static constexpr DataSource source = Source;

  SourcedEvents() = default;
  explicit SourcedEvents(std::vector<Event> events)
      : events_(std::move(events)) {
    require_time_sorted(events_);
  }

  std::span<const Event> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Events with start <= t < end, keeping the tag.
  SourcedEvents between(double start, double end) const {
    auto lo = std::lower_bound(events_.begin(), events_.end(), start,
                               [](const Event& e, double t) { return e.t < t; });
    auto hi = std::lower_bound(lo, events_.end(), end,
                               [](const Event& e, double t) { return e.t < t; });
    return SourcedEvents(std::vector<Event>(lo, hi));
  }

 private:
  std::vector<Event> events_;
};

using FullEvents = SourcedEvents<DataSource::full>;
using ReportedEvents = SourcedEvents<DataSource::reported>;

struct BranchingSample {
  // Per event: 0 for background, otherwise 1 + index of the parent.
  std::vector<std::uint32_t> parent;
};

struct CandidateSample {
  std::vector<Event> events;  // time-sorted
  BranchingSample branching;
};

/// Branching simulation of the generator over the domain and [0, horizon).
/// Events leaving the domain or the horizon are discarded together with
/// their would-be descendants. Throws std::invalid_argument if m >= 1.
CandidateSample sample_candidates(const IntensityModel& generator,
                                  const SpatialDomain& domain, double horizon,
                                  Rng& rng);

/// p_d = scaled population * victimization * time factor / |C_d|.
double victimization_keep_prob(const DistrictRecord& district,
                               std::size_t candidate_count,
                               const SimConfig& config);

struct CrimeDataset {
  std::vector<Event> candidates;           // time-sorted
  std::vector<int> district;               // district id per candidate
  BranchingSample branching;
  std::vector<std::uint32_t> true_index;     // ascending candidate indices
  std::vector<std::uint32_t> reported_index; // ascending, subset of true
  std::vector<double> keep_prob;           // p_d per district table position
  double total_rate = 0.0;

  FullEvents true_events() const;
  ReportedEvents reported_events() const;
  std::vector<Event> select(std::span<const std::uint32_t> index) const;
};

/// Per-district Binomial(|C_d|, p_d) subsample without replacement. Returns
/// ascending candidate indices; writes p_d per district position to keep_prob.
std::vector<std::uint32_t> thin_true(std::span<const Event> candidates,
                                     std::span<const int> district_of_event,
                                     const DistrictTable& districts,
                                     const SimConfig& config, Rng& rng,
                                     std::vector<double>* keep_prob = nullptr);

/// Per-district Binomial(|D_d|, q_d) subsample of the true indices.
std::vector<std::uint32_t> thin_reported(
    std::span<const std::uint32_t> true_index,
    std::span<const int> district_of_event, const DistrictTable& districts,
    Rng& rng);

/// Ground-truth expected true events in a cell at time t: p_d times the
/// generator's cell integral given all candidates before t.
double true_expected_cell_count(const IntensityModel& generator,
                                std::span<const Event> candidate_history,
                                const GridCell& cell, double t,
                                double keep_prob);

// Daily ground truth for every cell, maintained incrementally over the full
// candidate history.
class GroundTruth {
 public:
  GroundTruth(const IntensityModel& generator, const DistrictMap& map,
              const DistrictTable& districts, std::span<const double> keep_prob);

  /// Expected true counts per cell at time t (non-decreasing across calls).
  /// `candidates` is the complete sorted candidate list; events with
  /// t_k < t are absorbed as needed.
  const std::vector<double>& at(double t, std::span<const Event> candidates);

 private:
  std::vector<double> background_;  // p_d * background mass per cell
  std::vector<double> scale_;       // p_d * m * omega per cell
  CellExcitation field_;
  std::size_t cursor_ = 0;
  std::vector<double> rates_;
};

/// Simulates one full dataset. total_rate must be positive.
CrimeDataset simulate(const SimConfig& config, const DistrictMap& map,
                      const DistrictTable& districts, double total_rate,
                      std::uint64_t seed);

/// Background total rate such that max_d p_d <= max_keep_prob on a pilot run:
/// starts from an analytic estimate and multiplies by 1.5 until it holds.
double calibrate_total_rate(const SimConfig& config, const DistrictMap& map,
                            const DistrictTable& districts);

struct SanityRow {
  int district = 0;
  std::string name;
  double simulated = 0.0;   // mean daily true events
  double integral = 0.0;    // mean daily thinned-intensity integral
  double survey = 0.0;      // survey-implied daily count
};

/// Per-district average daily counts (simulated, integral-implied,
/// survey-implied) over the horizon.
std::vector<SanityRow> sanity_summary(const CrimeDataset& dataset,
                                      const SimConfig& config,
                                      const DistrictMap& map,
                                      const DistrictTable& districts);

}  // namespace hotspot
