#pragma once

// Day-by-day hot-spot prediction for the six model variants: SEPP and
// exponentially weighted moving average (MAVG) forecasters trained on the
// true (S1, M1) or reported (S2, M2) data, and their district-rescaled
// versions (S3, M3).

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotspot/districts.hpp"
#include "hotspot/excitation.hpp"
#include "hotspot/model.hpp"
#include "hotspot/simulator.hpp"

namespace hotspot {

enum class ModelFamily { sepp, mavg };

struct ModelVariant {
  ModelFamily family = ModelFamily::sepp;
  DataSource data = DataSource::full;
  bool rescaled = false;

  /// Throws std::invalid_argument for a rescaled full-data variant.
  void validate() const;
  /// "S1" .. "S3", "M1" .. "M3".
  std::string label() const;
  static ModelVariant parse(std::string_view label);
  /// S1, S2, S3, M1, M2, M3.
  static std::vector<ModelVariant> all();

  friend bool operator==(const ModelVariant&, const ModelVariant&) = default;
};

/// Comma-separated labels, e.g. "S1,M2". Duplicates are removed; the result
/// follows the canonical S1..M3 order.
std::vector<ModelVariant> parse_variants(std::string_view list);

struct CellPredictions {
  double day = 0.0;
  std::vector<double> values;  // expected events on [day, day + 1) per cell
};

struct HotspotSet {
  double day = 0.0;
  std::vector<std::size_t> cells;  // ascending

  bool contains(std::size_t cell) const;
};

/// Per-cell integral of the fitted intensity at time t given the history.
/// Throws ContractViolation if the history holds events at or after t.
CellPredictions sepp_predict_day(const SeppParams& params,
                                 std::span<const Event> history,
                                 const SpatialDomain& domain, double t,
                                 double deviation = kBackgroundDeviationKm);

/// Appends a day's batch to the history. Every event must satisfy
/// day <= t < day + 1 and follow the existing history in time.
std::vector<Event> observe_day(std::vector<Event> history, double day,
                               std::span<const Event> batch);

// Incremental SEPP forecaster: fixed parameters, growing history. The
// triggering part is carried as a per-cell excitation field.
class SeppForecaster {
 public:
  SeppForecaster(const SeppParams& params, const SpatialDomain& domain,
                 double deviation = kBackgroundDeviationKm);

  /// Adds time-sorted events that follow everything observed so far.
  void observe(std::span<const Event> events);
  /// Predictions for [t, t + 1). t must not decrease between calls and must
  /// exceed every observed event time.
  CellPredictions predict(double t);

  std::size_t history_size() const { return observed_; }
  const SeppParams& params() const { return params_; }

 private:
  SeppParams params_;
  std::vector<double> background_;
  CellExcitation field_;
  std::vector<Event> pending_;
  std::size_t observed_ = 0;
  double last_time_;
};

/// Event counts per cell for each day in [first_day, first_day + days).
/// Events outside that span are ignored.
std::vector<std::vector<double>> daily_cell_counts(std::span<const Event> events,
                                                   const SpatialDomain& domain,
                                                   double first_day, int days);

/// 25 smoothing rates linearly spaced over [0.02, 2.0] per day.
std::vector<double> default_beta_grid();

/// Mean squared one-step-ahead error of the MAVG forecast over all cells and
/// the days 1 .. D-1 of the series.
double mavg_forecast_mse(const std::vector<std::vector<double>>& daily_counts,
                         double beta);

/// Candidate with the smallest forecast MSE; near ties (1e-12 relative) go
/// to the smallest beta. Needs at least two days and one candidate.
double mavg_fit_bandwidth(const std::vector<std::vector<double>>& daily_counts,
                          std::span<const double> candidates);

// Exponentially weighted per-cell average of all observed daily counts,
// updated recursively: newest day weight 1, the one before e^-beta, ...
class MavgState {
 public:
  MavgState(double beta, std::size_t cells);

  void observe(std::span<const double> counts);

  double beta() const { return beta_; }
  std::size_t days_observed() const { return days_; }
  std::size_t cell_count() const { return numerator_.size(); }
  /// Weighted average for one cell. Requires at least one observed day.
  double forecast(std::size_t cell) const;

 private:
  double beta_;
  double decay_;
  std::vector<double> numerator_;
  double denominator_ = 0.0;
  std::size_t days_ = 0;
};

/// Forecast for every cell on day t. Throws std::logic_error if nothing has
/// been observed.
CellPredictions mavg_predict_day(const MavgState& state, double t);

/// Divides each cell's value by its district's reporting rate.
CellPredictions rescale(const CellPredictions& predictions,
                        const DistrictMap& map, const DistrictTable& districts);

/// The K largest cells; ties go to the smaller cell index.
HotspotSet select_hotspots(const CellPredictions& predictions, std::size_t k);

/// Throws std::invalid_argument unless every event lies in [day, day + 1).
void check_day_batch(double day, std::span<const Event> batch);

// Forecasters bound to a data source, so a pipeline built for reported data
// only accepts reported batches.
template <DataSource Source>
class SeppPredictor {
 public:
  SeppPredictor(const SeppParams& params, const SpatialDomain& domain,
                double deviation = kBackgroundDeviationKm)
      : core_(params, domain, deviation) {}

  void observe(const SourcedEvents<Source>& events) { core_.observe(events.events()); }
  /// Adds one day's batch; every event must lie in [day, day + 1).
  void observe_day(double day, const SourcedEvents<Source>& batch) {
    check_day_batch(day, batch.events());
    core_.observe(batch.events());
  }
  CellPredictions predict(double t) { return core_.predict(t); }
  std::size_t history_size() const { return core_.history_size(); }

 private:
  SeppForecaster core_;
};

template <DataSource Source>
class MavgPredictor {
 public:
  MavgPredictor(double beta, const SpatialDomain& domain)
      : domain_(domain), state_(beta, domain.cell_count()) {}

  /// Adds one day's counts built from a batch in [day, day + 1).
  void observe_day(double day, const SourcedEvents<Source>& batch) {
    check_day_batch(day, batch.events());
    state_.observe(daily_cell_counts(batch.events(), domain_, day, 1).front());
  }
  void observe_counts(std::span<const double> counts) { state_.observe(counts); }
  CellPredictions predict(double t) const { return mavg_predict_day(state_, t); }
  const MavgState& state() const { return state_; }

 private:
  SpatialDomain domain_;
  MavgState state_;
};

}  // namespace hotspot
