#include "hotspot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace hotspot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using GroupKey = std::tuple<std::size_t, int, std::string>;

GroupKey group_of(const MetricRecord& r) {
  return {model_rank(r.model), r.district, r.model};
}

// Records grouped by (model order, district id).
template <class F>
std::vector<DistrictStat> per_group(std::span<const MetricRecord> records, F&& value) {
  std::map<GroupKey, std::pair<std::size_t, std::vector<double>>> groups;
  for (const MetricRecord& r : records) {
    auto& g = groups[group_of(r)];
    ++g.first;
    if (auto v = value(r)) g.second.push_back(*v);
  }
  std::vector<DistrictStat> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    out.push_back({std::get<1>(key), std::get<2>(key), g.first,
                   summarize_values(std::move(g.second))});
  }
  return out;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::string sentinel_name(Sentinel s) {
  switch (s) {
    case Sentinel::excluded: return "excluded";
    case Sentinel::omitted: return "omitted";
    default: return "";
  }
}

int hotspots_in_district(int district, const HotspotSet& set, const DistrictMap& map) {
  int n = 0;
  for (std::size_t c : set.cells) n += map.district_of_cell(c) == district;
  return n;
}

MetricValue relative_count(int district, const HotspotSet& true_hs,
                           const HotspotSet& pred_hs, const DistrictMap& map) {
  const int t = hotspots_in_district(district, true_hs, map);
  const int p = hotspots_in_district(district, pred_hs, map);
  if (t == 0) {
    if (p == 0) return {1.0, Sentinel::none};
    return {0.0, Sentinel::excluded};
  }
  return {static_cast<double>(p) / t, Sentinel::none};
}

MetricValue min_true_threshold(int district, const HotspotSet& pred_hs,
                               std::span<const double> true_cell_rates,
                               const DistrictMap& map) {
  if (true_cell_rates.size() != map.cell_count()) {
    throw std::invalid_argument("min_true_threshold: one rate per cell expected");
  }
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t c : pred_hs.cells) {
    if (map.district_of_cell(c) != district) continue;
    best = std::min(best, true_cell_rates[c]);
    any = true;
  }
  if (!any) return {0.0, Sentinel::omitted};
  return {best, Sentinel::none};
}

double district_hotspot_share(int district, const HotspotSet& pred_hs,
                              const DistrictMap& map) {
  const auto& cells = map.cells_of(district);
  return static_cast<double>(hotspots_in_district(district, pred_hs, map)) /
         static_cast<double>(cells.size());
}

std::vector<MetricRecord> day_records(int run, int day, const std::string& model,
                                      const HotspotSet& true_hs,
                                      const HotspotSet& pred_hs,
                                      std::span<const double> true_cell_rates,
                                      const DistrictMap& map,
                                      const DistrictTable& districts) {
  std::vector<int> true_count(districts.size(), 0), pred_count(districts.size(), 0);
  for (std::size_t c : true_hs.cells) ++true_count[districts.position_of(map.district_of_cell(c))];
  for (std::size_t c : pred_hs.cells) ++pred_count[districts.position_of(map.district_of_cell(c))];

  std::vector<MetricRecord> out;
  out.reserve(districts.size());
  for (std::size_t pos = 0; pos < districts.size(); ++pos) {
    const int id = districts.at(pos).id;
    MetricRecord r;
    r.run = run;
    r.day = day;
    r.district = id;
    r.model = model;
    r.true_hotspots = true_count[pos];
    r.predicted_hotspots = pred_count[pos];
    if (r.true_hotspots == 0) {
      r.relative_count = r.predicted_hotspots == 0 ? MetricValue{1.0, Sentinel::none}
                                                   : MetricValue{0.0, Sentinel::excluded};
    } else {
      r.relative_count = {static_cast<double>(r.predicted_hotspots) / r.true_hotspots,
                          Sentinel::none};
    }
    r.min_true_threshold = min_true_threshold(id, pred_hs, true_cell_rates, map);
    r.share = static_cast<double>(r.predicted_hotspots) /
              static_cast<double>(map.cells_of(id).size());
    out.push_back(std::move(r));
  }
  return out;
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

double mean(std::span<const double> values) {
  if (values.empty()) return kNaN;
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value() / static_cast<double>(values.size());
}

Summary summarize_values(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.median = s.q1 = s.q3 = kNaN;
    return s;
  }
  s.mean = mean(values);
  std::sort(values.begin(), values.end());
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  return s;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) return kNaN;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx), my = mean(ry);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy.add((rx[i] - mx) * (ry[i] - my));
    sxx.add((rx[i] - mx) * (rx[i] - mx));
    syy.add((ry[i] - my) * (ry[i] - my));
  }
  if (!(sxx.value() > 0.0) || !(syy.value() > 0.0)) return kNaN;
  return sxy.value() / std::sqrt(sxx.value() * syy.value());
}

std::vector<NoTrueFraction> no_true_fractions(std::span<const MetricRecord> records) {
  struct Counts {
    std::size_t steps = 0, zero_pred = 0, zero_none = 0;
  };
  std::map<GroupKey, Counts> groups;
  for (const MetricRecord& r : records) {
    auto& g = groups[group_of(r)];
    ++g.steps;
    if (r.true_hotspots == 0) ++(r.predicted_hotspots > 0 ? g.zero_pred : g.zero_none);
  }
  std::vector<NoTrueFraction> out;
  for (const auto& [key, g] : groups) {
    const double n = static_cast<double>(g.steps);
    NoTrueFraction f;
    f.district = std::get<1>(key);
    f.model = std::get<2>(key);
    f.steps = g.steps;
    f.zero_true_predicted = static_cast<double>(g.zero_pred) / n;
    f.zero_true_not_predicted = static_cast<double>(g.zero_none) / n;
    f.zero_true = static_cast<double>(g.zero_pred + g.zero_none) / n;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<DistrictStat> overprediction(std::span<const MetricRecord> records) {
  return per_group(records, [](const MetricRecord& r) -> std::optional<double> {
    return static_cast<double>(r.predicted_hotspots - r.true_hotspots);
  });
}

std::vector<DistrictStat> relative_count_summary(std::span<const MetricRecord> records) {
  return per_group(records, [](const MetricRecord& r) -> std::optional<double> {
    if (!r.relative_count.present()) return std::nullopt;
    return r.relative_count.value;
  });
}

std::vector<DistrictStat> threshold_summary(std::span<const MetricRecord> records) {
  return per_group(records, [](const MetricRecord& r) -> std::optional<double> {
    if (!r.min_true_threshold.present()) return std::nullopt;
    return r.min_true_threshold.value;
  });
}

bool is_regular(const DistrictStat& thresholds, double min_fraction) {
  if (thresholds.steps == 0) return false;
  return static_cast<double>(thresholds.summary.count) >=
         min_fraction * static_cast<double>(thresholds.steps);
}

HeatTables heat_table(std::span<const double> mean_true,
                      std::span<const double> mean_predicted) {
  auto normalise = [](std::span<const double> v) {
    double top = 0.0;
    for (double x : v) top = std::max(top, x);
    if (!(top > 0.0)) throw std::invalid_argument("heat_table: table has no positive value");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= top;
    return out;
  };
  return {normalise(mean_true), normalise(mean_predicted)};
}

std::size_t model_rank(const std::string& label) {
  static const char* const order[] = {"S1", "S2", "S3", "M1", "M2", "M3"};
  for (std::size_t k = 0; k < 6; ++k) {
    if (label == order[k]) return k;
  }
  return 6;
}

}  // namespace hotspot
