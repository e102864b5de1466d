#include "hotspot/excitation.hpp"

#include <algorithm>
#include <cmath>

namespace hotspot {

namespace {

// Beyond this many deviations a Gaussian's mass is below 1e-31 and cannot
// change a double-precision sum that includes the cell's own background.
constexpr double kSupportDeviations = 12.0;

}  // namespace

CellExcitation::CellExcitation(const SpatialDomain& domain, double omega,
                               double sigma_x, double sigma_y,
                               double start_time)
    : domain_(domain),
      omega_(omega),
      sigma_x_(sigma_x),
      sigma_y_(sigma_y),
      time_(start_time),
      values_(domain.cell_count(), 0.0),
      px_(static_cast<std::size_t>(domain.nx()), 0.0),
      py_(static_cast<std::size_t>(domain.ny()), 0.0) {
  if (!(omega > 0.0) || !(sigma_x > 0.0) || !(sigma_y > 0.0)) {
    throw std::invalid_argument("CellExcitation: invalid kernel parameters");
  }
}

void CellExcitation::advance(double t, std::span<const Event> events) {
  if (t < time_) {
    throw ContractViolation("CellExcitation: time cannot move backwards");
  }
  if (t > time_) {
    const double decay = std::exp(-omega_ * (t - time_));
    for (double& v : values_) v *= decay;
    time_ = t;
  }
  for (const Event& e : events) absorb(e);
}

void CellExcitation::absorb(const Event& e) {
  if (!(e.t < time_)) {
    throw ContractViolation("CellExcitation: event is not in the past");
  }
  const double cs = domain_.cell_size();
  const int nx = domain_.nx();
  const int ny = domain_.ny();
  const double rx = kSupportDeviations * sigma_x_;
  const double ry = kSupportDeviations * sigma_y_;
  const int ix0 = std::max(0, static_cast<int>(std::floor((e.x - rx - domain_.x_min()) / cs)));
  const int ix1 = std::min(nx - 1, static_cast<int>(std::floor((e.x + rx - domain_.x_min()) / cs)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((e.y - ry - domain_.y_min()) / cs)));
  const int iy1 = std::min(ny - 1, static_cast<int>(std::floor((e.y + ry - domain_.y_min()) / cs)));
  if (ix0 > ix1 || iy0 > iy1) return;

  for (int ix = ix0; ix <= ix1; ++ix) {
    const GridCell c = domain_.cell(ix, 0);
    px_[ix] = gaussian_interval_mass(c.x_lo, c.x_hi, e.x, sigma_x_);
  }
  for (int iy = iy0; iy <= iy1; ++iy) {
    const GridCell c = domain_.cell(0, iy);
    py_[iy] = gaussian_interval_mass(c.y_lo, c.y_hi, e.y, sigma_y_);
  }
  const double weight = std::exp(-omega_ * (time_ - e.t));
  for (int iy = iy0; iy <= iy1; ++iy) {
    const double wy = weight * py_[iy];
    double* row = values_.data() + static_cast<std::size_t>(iy) * nx;
    for (int ix = ix0; ix <= ix1; ++ix) row[ix] += wy * px_[ix];
  }
}

}  // namespace hotspot
