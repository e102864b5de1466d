#include "hotspot/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hotspot {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_integer_multiple(double length, double step) {
  const double ratio = length / step;
  return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio);
}

}  // namespace

SpatialDomain::SpatialDomain(double x_min, double x_max, double y_min,
                             double y_max, double cell_size, double horizon)
    : x_min_(x_min),
      x_max_(x_max),
      y_min_(y_min),
      y_max_(y_max),
      cell_size_(cell_size),
      horizon_(horizon) {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw std::invalid_argument("SpatialDomain: empty extent");
  }
  if (!(cell_size > 0.0)) {
    throw std::invalid_argument("SpatialDomain: cell_size must be positive");
  }
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("SpatialDomain: horizon must be positive");
  }
  if (!is_integer_multiple(x_max - x_min, cell_size) ||
      !is_integer_multiple(y_max - y_min, cell_size)) {
    throw std::invalid_argument(
        "SpatialDomain: extent is not a multiple of cell_size");
  }
  const double tol = 1e-9 * std::max(x_max - x_min, y_max - y_min);
  if (std::abs(x_min + x_max) > tol || std::abs(y_min + y_max) > tol) {
    throw std::invalid_argument("SpatialDomain: must be centred at the origin");
  }
  nx_ = static_cast<int>(std::lround((x_max - x_min) / cell_size));
  ny_ = static_cast<int>(std::lround((y_max - y_min) / cell_size));
}

SpatialDomain SpatialDomain::centered(double width, double height,
                                      double cell_size, double horizon) {
  return SpatialDomain(-width / 2, width / 2, -height / 2, height / 2,
                       cell_size, horizon);
}

GridCell SpatialDomain::cell(int ix, int iy) const {
  if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) {
    throw std::out_of_range("SpatialDomain::cell: index out of range");
  }
  GridCell c;
  c.ix = ix;
  c.iy = iy;
  c.x_lo = x_min_ + ix * cell_size_;
  c.x_hi = (ix + 1 == nx_) ? x_max_ : x_min_ + (ix + 1) * cell_size_;
  c.y_lo = y_min_ + iy * cell_size_;
  c.y_hi = (iy + 1 == ny_) ? y_max_ : y_min_ + (iy + 1) * cell_size_;
  return c;
}

GridCell SpatialDomain::cell(std::size_t index) const {
  return cell(static_cast<int>(index % static_cast<std::size_t>(nx_)),
              static_cast<int>(index / static_cast<std::size_t>(nx_)));
}

std::size_t SpatialDomain::cell_of(double x, double y) const {
  if (!contains(x, y)) {
    throw std::out_of_range("SpatialDomain::cell_of: point outside domain");
  }
  const int ix = std::min(nx_ - 1, static_cast<int>((x - x_min_) / cell_size_));
  const int iy = std::min(ny_ - 1, static_cast<int>((y - y_min_) / cell_size_));
  return cell_index(ix, iy);
}

void SeppParams::validate() const {
  const double values[] = {mu_bar, theta, omega, sigma_x, sigma_y};
  for (double v : values) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw std::invalid_argument(
          "SeppParams: all parameters must be finite and positive");
    }
  }
}

bool SeppParams::subcritical() const { return offspring_mean(*this) < 1.0; }

double offspring_mean(const SeppParams& params) {
  return kTwoPi * params.theta * params.sigma_x * params.sigma_y;
}

double theta_for_offspring_mean(double m, double sigma_x, double sigma_y) {
  return m / (kTwoPi * sigma_x * sigma_y);
}

double background_intensity(const SeppParams& params, double x, double y,
                            double deviation) {
  const double var = deviation * deviation;
  return params.mu_bar / (kTwoPi * var) * std::exp(-x * x / (2.0 * var)) *
         std::exp(-y * y / (2.0 * var));
}

double triggering(const SeppParams& params, double dt, double dx, double dy) {
  if (!(dt > 0.0)) {
    throw std::domain_error("triggering: requires dt > 0");
  }
  return params.theta * params.omega * std::exp(-params.omega * dt) *
         std::exp(-dx * dx / (2.0 * params.sigma_x * params.sigma_x)) *
         std::exp(-dy * dy / (2.0 * params.sigma_y * params.sigma_y));
}

double gaussian_interval_mass(double lo, double hi, double center, double sd) {
  if (!(hi > lo)) return 0.0;
  const double scale = 1.0 / (sd * std::numbers::sqrt2);
  const double a = (lo - center) * scale;
  const double b = (hi - center) * scale;
  // Upper tail: both bounds right of the centre.
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  // Lower tail: both bounds left of the centre.
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 0.5 * (std::erf(b) - std::erf(a));
}

double gaussian_domain_mass(const SpatialDomain& domain, double deviation) {
  return gaussian_interval_mass(domain.x_min(), domain.x_max(), 0.0,
                                deviation) *
         gaussian_interval_mass(domain.y_min(), domain.y_max(), 0.0,
                                deviation);
}

double GaussianBackground::density(double x, double y) const {
  SeppParams p;
  p.mu_bar = mu_bar;
  return background_intensity(p, x, y, deviation);
}

double GaussianBackground::mass(double x_lo, double x_hi, double y_lo,
                                double y_hi) const {
  return mu_bar * gaussian_interval_mass(x_lo, x_hi, 0.0, deviation) *
         gaussian_interval_mass(y_lo, y_hi, 0.0, deviation);
}

MixtureBackground MixtureBackground::equal_weights(std::vector<Center> centers,
                                                   double bandwidth,
                                                   double total_rate) {
  MixtureBackground mix;
  const std::size_t n = centers.size();
  mix.centers = std::move(centers);
  mix.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  mix.bandwidth = bandwidth;
  mix.total_rate = total_rate;
  mix.validate();
  return mix;
}

void MixtureBackground::validate() const {
  if (centers.empty()) {
    throw std::invalid_argument("MixtureBackground: needs at least one centre");
  }
  if (weights.size() != centers.size()) {
    throw std::invalid_argument("MixtureBackground: one weight per centre");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("MixtureBackground: weights must be positive");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("MixtureBackground: weights must sum to one");
  }
  if (!(bandwidth > 0.0) || !(total_rate > 0.0)) {
    throw std::invalid_argument(
        "MixtureBackground: bandwidth and total_rate must be positive");
  }
}

double MixtureBackground::density(double x, double y) const {
  const double var = bandwidth * bandwidth;
  double sum = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double dx = x - centers[j].x;
    const double dy = y - centers[j].y;
    sum += weights[j] * std::exp(-(dx * dx + dy * dy) / (2.0 * var));
  }
  return total_rate * sum / (kTwoPi * var);
}

double MixtureBackground::mass(double x_lo, double x_hi, double y_lo,
                               double y_hi) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    sum += weights[j] *
           gaussian_interval_mass(x_lo, x_hi, centers[j].x, bandwidth) *
           gaussian_interval_mass(y_lo, y_hi, centers[j].y, bandwidth);
  }
  return total_rate * sum;
}

double background_density(const Background& background, double x, double y) {
  return std::visit([&](const auto& b) { return b.density(x, y); },
                    background);
}

double background_mass(const Background& background, const GridCell& cell) {
  return std::visit(
      [&](const auto& b) {
        return b.mass(cell.x_lo, cell.x_hi, cell.y_lo, cell.y_hi);
      },
      background);
}

IntensityModel IntensityModel::fitted(const SeppParams& params,
                                      double deviation) {
  params.validate();
  IntensityModel model;
  model.background = GaussianBackground{params.mu_bar, deviation};
  model.theta = params.theta;
  model.omega = params.omega;
  model.sigma_x = params.sigma_x;
  model.sigma_y = params.sigma_y;
  return model;
}

IntensityModel IntensityModel::generator(MixtureBackground background,
                                         double offspring_mean, double omega,
                                         double sigma_x, double sigma_y) {
  background.validate();
  if (!(offspring_mean >= 0.0) || !(omega > 0.0) || !(sigma_x > 0.0) ||
      !(sigma_y > 0.0)) {
    throw std::invalid_argument("IntensityModel::generator: invalid offspring");
  }
  IntensityModel model;
  model.background = std::move(background);
  model.theta = theta_for_offspring_mean(offspring_mean, sigma_x, sigma_y);
  model.omega = omega;
  model.sigma_x = sigma_x;
  model.sigma_y = sigma_y;
  return model;
}

double IntensityModel::offspring_mean() const {
  return kTwoPi * theta * sigma_x * sigma_y;
}

double IntensityModel::kernel(double dt, double dx, double dy) const {
  return theta * omega *
         std::exp(-omega * dt - dx * dx / (2.0 * sigma_x * sigma_x) -
                  dy * dy / (2.0 * sigma_y * sigma_y));
}

double IntensityModel::kernel_cell_mass(double dt, double x, double y,
                                        const GridCell& cell) const {
  return offspring_mean() * omega * std::exp(-omega * dt) *
         gaussian_interval_mass(cell.x_lo, cell.x_hi, x, sigma_x) *
         gaussian_interval_mass(cell.y_lo, cell.y_hi, y, sigma_y);
}

void require_time_sorted(std::span<const Event> history) {
  for (std::size_t k = 1; k < history.size(); ++k) {
    if (history[k].t < history[k - 1].t) {
      throw ContractViolation("history is not sorted by time");
    }
  }
}

double conditional_intensity(const IntensityModel& model,
                             std::span<const Event> history, double x,
                             double y, double t) {
  require_time_sorted(history);
  if (t < 0.0) throw ContractViolation("conditional_intensity: t < 0");
  double value = background_density(model.background, x, y);
  for (const Event& e : history) {
    if (!(e.t < t)) break;
    value += model.kernel(t - e.t, x - e.x, y - e.y);
  }
  return value;
}

double cell_integral(const IntensityModel& model,
                     std::span<const Event> history, const GridCell& cell,
                     double t) {
  require_time_sorted(history);
  if (t < 0.0) throw ContractViolation("cell_integral: t < 0");
  double value = background_mass(model.background, cell);
  for (const Event& e : history) {
    if (!(e.t < t)) break;
    value += model.kernel_cell_mass(t - e.t, e.x, e.y, cell);
  }
  return value;
}

}  // namespace hotspot
