#pragma once

// Per-district equity measurements of hot-spot predictions and their
// aggregation across runs and days.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hotspot/districts.hpp"
#include "hotspot/predictors.hpp"

namespace hotspot {

enum class Sentinel { none, excluded, omitted };

std::string sentinel_name(Sentinel s);  // "", "excluded", "omitted"

struct MetricValue {
  double value = 0.0;  // meaningless when flag != none
  Sentinel flag = Sentinel::none;

  bool present() const { return flag == Sentinel::none; }
};

struct MetricRecord {
  int run = 0;
  int day = 0;
  int district = 0;
  std::string model;
  int true_hotspots = 0;
  int predicted_hotspots = 0;
  MetricValue relative_count;
  MetricValue min_true_threshold;
  double share = 0.0;  // fraction of the district's cells predicted
};

/// Number of cells of the set inside the district.
int hotspots_in_district(int district, const HotspotSet& set, const DistrictMap& map);

/// predicted / true with 0/0 = 1 and (true 0, predicted > 0) excluded.
MetricValue relative_count(int district, const HotspotSet& true_hs,
                           const HotspotSet& pred_hs, const DistrictMap& map);

/// Smallest true cell rate among the district's predicted hot spots;
/// omitted when there are none.
MetricValue min_true_threshold(int district, const HotspotSet& pred_hs,
                               std::span<const double> true_cell_rates,
                               const DistrictMap& map);

double district_hotspot_share(int district, const HotspotSet& pred_hs,
                              const DistrictMap& map);

/// One record per district (in table order) for a model on one day.
std::vector<MetricRecord> day_records(int run, int day, const std::string& model,
                                      const HotspotSet& true_hs,
                                      const HotspotSet& pred_hs,
                                      std::span<const double> true_cell_rates,
                                      const DistrictMap& map,
                                      const DistrictTable& districts);

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double mean(std::span<const double> values);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;  // NaN for an empty sample, as are the quantiles
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Mean and quartiles (linear interpolation between order statistics).
Summary summarize_values(std::vector<double> values);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side is constant or fewer than two pairs are given.
double spearman(std::span<const double> x, std::span<const double> y);

struct NoTrueFraction {
  int district = 0;
  std::string model;
  std::size_t steps = 0;
  double zero_true = 0.0;                // fraction of steps without true hot spots
  double zero_true_predicted = 0.0;      // ... and with predicted ones
  double zero_true_not_predicted = 0.0;  // ... and without predicted ones
};

/// Per (model, district) over all runs and days.
std::vector<NoTrueFraction> no_true_fractions(std::span<const MetricRecord> records);

struct DistrictStat {
  int district = 0;
  std::string model;
  std::size_t steps = 0;  // all (run, day) pairs
  Summary summary;        // over the pairs that carry a value
};

/// Mean (predicted - true) hot spots per (model, district).
std::vector<DistrictStat> overprediction(std::span<const MetricRecord> records);
/// Relative counts per (model, district), excluded steps dropped.
std::vector<DistrictStat> relative_count_summary(std::span<const MetricRecord> records);
/// Thresholds per (model, district), omitted steps dropped.
std::vector<DistrictStat> threshold_summary(std::span<const MetricRecord> records);

/// A district is regular under a model when at least half of its steps carry
/// a threshold.
bool is_regular(const DistrictStat& thresholds, double min_fraction = 0.5);

struct HeatTables {
  std::vector<double> true_rates;
  std::vector<double> predicted;
};

/// Each table divided by its own maximum. Throws if either maximum is not
/// positive.
HeatTables heat_table(std::span<const double> mean_true,
                      std::span<const double> mean_predicted);

/// Position of a model label in S1, S2, S3, M1, M2, M3 (labels outside that
/// list sort last).
std::size_t model_rank(const std::string& label);

}  // namespace hotspot
