#pragma once

// Self-exciting spatio-temporal point process (SEPP) primitives: the scaled
// Gaussian and mixture backgrounds, the exponential/Gaussian triggering kernel,
// the conditional intensity and its analytic integral over grid cells.
//
// Units throughout: space in km, time in days, intensities in events/day/km^2.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hotspot {

/// Standard deviation of the fitted model's background Gaussian, in km.
inline constexpr double kBackgroundDeviationKm = 15.0;

/// Raised when a caller breaks an ordering or causality precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Event {
  double x = 0.0;  // km east
  double y = 0.0;  // km north
  double t = 0.0;  // days

  friend bool operator==(const Event&, const Event&) = default;
};

struct GridCell {
  int ix = 0;
  int iy = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
};

// Rectangular city domain centred at the origin, tiled by square cells.
// Cells are indexed row-major: index = iy * nx + ix, so ascending index is
// ascending (iy, ix).
class SpatialDomain {
 public:
  SpatialDomain() = default;
  SpatialDomain(double x_min, double x_max, double y_min, double y_max,
                double cell_size, double horizon);

  static SpatialDomain centered(double width, double height, double cell_size,
                                double horizon);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  double cell_size() const { return cell_size_; }
  double horizon() const { return horizon_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  }

  bool contains(double x, double y) const {
    return x >= x_min_ && x < x_max_ && y >= y_min_ && y < y_max_;
  }

  GridCell cell(int ix, int iy) const;
  GridCell cell(std::size_t index) const;
  std::size_t cell_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(ix);
  }
  /// Index of the cell containing (x, y). Throws if outside the domain.
  std::size_t cell_of(double x, double y) const;

 private:
  double x_min_ = -0.5, x_max_ = 0.5, y_min_ = -0.5, y_max_ = 0.5;
  double cell_size_ = 1.0;
  double horizon_ = 1.0;
  int nx_ = 1, ny_ = 1;
};

// Theta = (mu_bar, theta, omega, sigma_x, sigma_y).
struct SeppParams {
  double mu_bar = 1.0;   // events/day
  double theta = 0.1;    // dimensionless
  double omega = 0.1;    // 1/day
  double sigma_x = 0.1;  // km
  double sigma_y = 0.1;  // km

  /// Throws std::invalid_argument unless all five are finite and positive.
  void validate() const;
  /// True when the offspring mean is below one.
  bool subcritical() const;

  friend bool operator==(const SeppParams&, const SeppParams&) = default;
};

/// Expected number of direct offspring per event, 2*pi*theta*sigma_x*sigma_y.
double offspring_mean(const SeppParams& params);

/// theta for a target offspring mean m at the given spatial deviations.
double theta_for_offspring_mean(double m, double sigma_x, double sigma_y);

/// Scaled isotropic Gaussian background centred at the origin.
double background_intensity(const SeppParams& params, double x, double y,
                            double deviation = kBackgroundDeviationKm);

/// Triggering kernel g(dt, dx, dy). Requires dt > 0.
double triggering(const SeppParams& params, double dt, double dx, double dy);

/// Mass of N(center, sd^2) on [lo, hi], accurate to ~1e-16 absolute in the
/// tails (uses erfc on the far side).
double gaussian_interval_mass(double lo, double hi, double center, double sd);

/// Total mass of an isotropic N(0, deviation^2) over the domain rectangle.
double gaussian_domain_mass(const SpatialDomain& domain,
                            double deviation = kBackgroundDeviationKm);

struct GaussianBackground {
  double mu_bar = 1.0;
  double deviation = kBackgroundDeviationKm;

  double density(double x, double y) const;
  double mass(double x_lo, double x_hi, double y_lo, double y_hi) const;
};

struct MixtureBackground {
  struct Center {
    double x = 0.0;
    double y = 0.0;
  };
  std::vector<Center> centers;
  std::vector<double> weights;  // normalised to sum to one
  double bandwidth = 2.0;       // km
  double total_rate = 1.0;      // events/day over the plane

  /// Equal-weight mixture; validates and normalises.
  static MixtureBackground equal_weights(std::vector<Center> centers,
                                         double bandwidth, double total_rate);
  void validate() const;
  double density(double x, double y) const;
  double mass(double x_lo, double x_hi, double y_lo, double y_hi) const;
};

using Background = std::variant<GaussianBackground, MixtureBackground>;

double background_density(const Background& background, double x, double y);
double background_mass(const Background& background, const GridCell& cell);

// A background paired with the triggering parameters. The fitted model uses
// a GaussianBackground; the data generator uses a MixtureBackground.
struct IntensityModel {
  Background background;
  double theta = 0.0;
  double omega = 1.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;

  static IntensityModel fitted(const SeppParams& params,
                               double deviation = kBackgroundDeviationKm);
  static IntensityModel generator(MixtureBackground background,
                                  double offspring_mean, double omega,
                                  double sigma_x, double sigma_y);

  double offspring_mean() const;
  /// g(dt, dx, dy) without the dt > 0 check.
  double kernel(double dt, double dx, double dy) const;
  /// Mass of g(dt, ., .) over a cell for a parent at (x, y).
  double kernel_cell_mass(double dt, double x, double y,
                          const GridCell& cell) const;
};

/// Throws ContractViolation unless the events are sorted by time.
void require_time_sorted(std::span<const Event> history);

/// lambda(x, y, t | history). Only events with t_k < t contribute.
double conditional_intensity(const IntensityModel& model,
                             std::span<const Event> history, double x,
                             double y, double t);

/// Spatial integral of lambda(., ., t | history) over the cell.
double cell_integral(const IntensityModel& model,
                     std::span<const Event> history, const GridCell& cell,
                     double t);

}  // namespace hotspot
