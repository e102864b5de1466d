#include "hotspot/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hotspot/csv.hpp"

namespace hotspot {

void ModelVariant::validate() const {
  if (rescaled && data != DataSource::reported) {
    throw std::invalid_argument("ModelVariant: only reported-data models are rescaled");
  }
}

std::string ModelVariant::label() const {
  validate();
  std::string out(1, family == ModelFamily::sepp ? 'S' : 'M');
  out += data == DataSource::full ? '1' : (rescaled ? '3' : '2');
  return out;
}

ModelVariant ModelVariant::parse(std::string_view label) {
  const std::string text(csv::trim(label));
  if (text.size() == 2) {
    ModelVariant v;
    const char f = text[0];
    const char n = text[1];
    if ((f == 'S' || f == 's' || f == 'M' || f == 'm') && n >= '1' && n <= '3') {
      v.family = (f == 'S' || f == 's') ? ModelFamily::sepp : ModelFamily::mavg;
      v.data = n == '1' ? DataSource::full : DataSource::reported;
      v.rescaled = n == '3';
      return v;
    }
  }
  throw std::invalid_argument("unknown model variant '" + text + "'");
}

std::vector<ModelVariant> ModelVariant::all() {
  std::vector<ModelVariant> out;
  for (const char* label : {"S1", "S2", "S3", "M1", "M2", "M3"}) {
    out.push_back(parse(label));
  }
  return out;
}

std::vector<ModelVariant> parse_variants(std::string_view list) {
  std::vector<bool> wanted(6, false);
  const auto canonical = ModelVariant::all();
  for (const std::string& item : csv::split(list)) {
    if (csv::trim(item).empty()) continue;
    const ModelVariant v = ModelVariant::parse(item);
    wanted[std::find(canonical.begin(), canonical.end(), v) - canonical.begin()] = true;
  }
  std::vector<ModelVariant> out;
  for (std::size_t k = 0; k < canonical.size(); ++k) {
    if (wanted[k]) out.push_back(canonical[k]);
  }
  if (out.empty()) throw std::invalid_argument("no model variants given");
  return out;
}

bool HotspotSet::contains(std::size_t cell) const {
  return std::binary_search(cells.begin(), cells.end(), cell);
}

CellPredictions sepp_predict_day(const SeppParams& params,
                                 std::span<const Event> history,
                                 const SpatialDomain& domain, double t,
                                 double deviation) {
  params.validate();
  require_time_sorted(history);
  if (!history.empty() && !(history.back().t < t)) {
    throw ContractViolation("sepp_predict_day: history reaches the prediction time");
  }
  const IntensityModel model = IntensityModel::fitted(params, deviation);
  CellPredictions out{t, std::vector<double>(domain.cell_count())};
  for (std::size_t c = 0; c < out.values.size(); ++c) {
    out.values[c] = cell_integral(model, history, domain.cell(c), t);
  }
  return out;
}

void check_day_batch(double day, std::span<const Event> batch) {
  for (const Event& e : batch) {
    if (!(e.t >= day && e.t < day + 1.0)) {
      throw std::invalid_argument("observe_day: event outside [day, day + 1)");
    }
  }
  require_time_sorted(batch);
}

std::vector<Event> observe_day(std::vector<Event> history, double day,
                               std::span<const Event> batch) {
  check_day_batch(day, batch);
  if (!batch.empty() && !history.empty() && batch.front().t < history.back().t) {
    throw ContractViolation("observe_day: batch precedes the history");
  }
  history.insert(history.end(), batch.begin(), batch.end());
  return history;
}

SeppForecaster::SeppForecaster(const SeppParams& params,
                               const SpatialDomain& domain, double deviation)
    : params_(params),
      field_(domain, params.omega, params.sigma_x, params.sigma_y,
             -std::numeric_limits<double>::infinity()),
      last_time_(-std::numeric_limits<double>::infinity()) {
  params.validate();
  const GaussianBackground background{params.mu_bar, deviation};
  background_.resize(domain.cell_count());
  for (std::size_t c = 0; c < background_.size(); ++c) {
    const GridCell cell = domain.cell(c);
    background_[c] = background.mass(cell.x_lo, cell.x_hi, cell.y_lo, cell.y_hi);
  }
}

void SeppForecaster::observe(std::span<const Event> events) {
  require_time_sorted(events);
  if (events.empty()) return;
  if (events.front().t < last_time_) {
    throw ContractViolation("SeppForecaster: events precede the history");
  }
  if (events.front().t < field_.time()) {
    throw ContractViolation("SeppForecaster: events precede a past prediction");
  }
  pending_.insert(pending_.end(), events.begin(), events.end());
  last_time_ = events.back().t;
  observed_ += events.size();
}

CellPredictions SeppForecaster::predict(double t) {
  if (!(t > last_time_)) {
    throw ContractViolation("SeppForecaster: prediction time within the history");
  }
  field_.advance(t, pending_);
  pending_.clear();
  const double scale = offspring_mean(params_) * params_.omega;
  const auto& f = field_.values();
  CellPredictions out{t, std::vector<double>(background_.size())};
  for (std::size_t c = 0; c < background_.size(); ++c) {
    out.values[c] = background_[c] + scale * f[c];
  }
  return out;
}

std::vector<std::vector<double>> daily_cell_counts(std::span<const Event> events,
                                                   const SpatialDomain& domain,
                                                   double first_day, int days) {
  if (days < 0) throw std::invalid_argument("daily_cell_counts: negative day count");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(days),
                                       std::vector<double>(domain.cell_count(), 0.0));
  for (const Event& e : events) {
    const double offset = e.t - first_day;
    if (!(offset >= 0.0 && offset < days)) continue;
    const auto d = static_cast<std::size_t>(std::floor(offset));
    out[d][domain.cell_of(e.x, e.y)] += 1.0;
  }
  return out;
}

std::vector<double> default_beta_grid() {
  constexpr int n = 25;
  constexpr double lo = 0.02, hi = 2.0;
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = lo + (hi - lo) * k / (n - 1);
  return out;
}

double mavg_forecast_mse(const std::vector<std::vector<double>>& daily_counts,
                         double beta) {
  if (daily_counts.size() < 2) {
    throw std::invalid_argument("mavg: at least two days of counts are needed");
  }
  MavgState state(beta, daily_counts.front().size());
  state.observe(daily_counts.front());
  double sum = 0.0;
  for (std::size_t d = 1; d < daily_counts.size(); ++d) {
    const auto& today = daily_counts[d];
    if (today.size() != state.cell_count()) {
      throw std::invalid_argument("mavg: ragged count table");
    }
    for (std::size_t c = 0; c < today.size(); ++c) {
      const double err = state.forecast(c) - today[c];
      sum += err * err;
    }
    state.observe(today);
  }
  return sum / (static_cast<double>(daily_counts.size() - 1) *
                static_cast<double>(state.cell_count()));
}

double mavg_fit_bandwidth(const std::vector<std::vector<double>>& daily_counts,
                          std::span<const double> candidates) {
  if (candidates.empty()) throw std::invalid_argument("mavg: empty candidate set");
  std::vector<double> mse(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    mse[k] = mavg_forecast_mse(daily_counts, candidates[k]);
  }
  const double best = *std::min_element(mse.begin(), mse.end());
  const double cutoff = best + 1e-12 * std::abs(best);
  double chosen = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (mse[k] <= cutoff) chosen = std::min(chosen, candidates[k]);
  }
  return chosen;
}

MavgState::MavgState(double beta, std::size_t cells)
    : beta_(beta), decay_(std::exp(-beta)), numerator_(cells, 0.0) {
  if (!(beta > 0.0) || std::isnan(beta)) {
    throw std::invalid_argument("MavgState: beta must be positive");
  }
}

void MavgState::observe(std::span<const double> counts) {
  if (counts.size() != numerator_.size()) {
    throw std::invalid_argument("MavgState: one count per cell expected");
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    numerator_[c] = counts[c] + decay_ * numerator_[c];
  }
  denominator_ = 1.0 + decay_ * denominator_;
  ++days_;
}

double MavgState::forecast(std::size_t cell) const {
  if (days_ == 0) throw std::logic_error("MavgState: no observed days");
  return numerator_.at(cell) / denominator_;
}

CellPredictions mavg_predict_day(const MavgState& state, double t) {
  if (state.days_observed() == 0) {
    throw std::logic_error("mavg_predict_day: no observed days");
  }
  CellPredictions out{t, std::vector<double>(state.cell_count())};
  for (std::size_t c = 0; c < out.values.size(); ++c) out.values[c] = state.forecast(c);
  return out;
}

CellPredictions rescale(const CellPredictions& predictions,
                        const DistrictMap& map, const DistrictTable& districts) {
  if (predictions.values.size() != map.cell_count()) {
    throw std::invalid_argument("rescale: predictions do not match the map");
  }
  CellPredictions out = predictions;
  for (std::size_t c = 0; c < out.values.size(); ++c) {
    const double q = districts.by_id(map.district_of_cell(c)).reporting_rate;
    if (!(q > 0.0)) throw std::invalid_argument("rescale: zero reporting rate");
    out.values[c] /= q;
  }
  return out;
}

HotspotSet select_hotspots(const CellPredictions& predictions, std::size_t k) {
  if (k == 0) throw std::invalid_argument("select_hotspots: K must be at least 1");
  const auto& v = predictions.values;
  for (double x : v) {
    if (std::isnan(x)) throw std::invalid_argument("select_hotspots: NaN prediction");
  }
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, v.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return v[a] > v[b] || (v[a] == v[b] && a < b);
                    });
  order.resize(take);
  std::sort(order.begin(), order.end());
  return HotspotSet{predictions.day, std::move(order)};
}

}  // namespace hotspot
