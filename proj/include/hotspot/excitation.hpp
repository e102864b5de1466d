#pragma once

#include <span>
#include <vector>

#include "hotspot/model.hpp"

namespace hotspot {

// Per-cell running sum of the spatially integrated, exponentially decayed
// triggering kernel:
//
//   F_c(t) = sum_{k : t_k < t} Px_k(c) * Py_k(c) * exp(-omega * (t - t_k))
//
// where Px_k, Py_k are the Gaussian masses of event k's kernel over the
// cell's x and y extents. The triggering part of a cell integral at time t
// is then offspring_mean * omega * F_c(t). Moving forward in time is a
// single multiplicative decay, so daily prediction costs O(cells + events).
class CellExcitation {
 public:
  CellExcitation(const SpatialDomain& domain, double omega, double sigma_x,
                 double sigma_y, double start_time = 0.0);

  /// Moves the evaluation time forward to t and absorbs `events`, which must
  /// all satisfy t_k < t and not have been absorbed before.
  void advance(double t, std::span<const Event> events = {});

  double time() const { return time_; }
  const std::vector<double>& values() const { return values_; }

 private:
  void absorb(const Event& e);

  SpatialDomain domain_;
  double omega_;
  double sigma_x_;
  double sigma_y_;
  double time_;
  std::vector<double> values_;
  std::vector<double> px_;
  std::vector<double> py_;
};

}  // namespace hotspot
