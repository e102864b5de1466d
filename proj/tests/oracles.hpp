#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hotspot/model.hpp"

namespace oracle {

// Adaptive 1-D Gauss-Kronrod over [a, b] split at the given breakpoints.
template <class F>
double integrate(F&& f, double a, double b, std::vector<double> breaks, double tol) {
  using boost::math::quadrature::gauss_kronrod;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = std::max(a, breaks[k]);
    const double hi = std::min(b, breaks[k + 1]);
    if (!(hi > lo)) continue;
    total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 10, tol);
  }
  return total;
}

// Nested quadrature of the conditional intensity over a cell, written from
// the defining formulas rather than the library's closed forms.
inline double intensity_over_cell(double mu_bar, double deviation, double theta,
                                  double omega, double sx, double sy,
                                  std::span<const hotspot::Event> history,
                                  double x_lo, double x_hi, double y_lo, double y_hi,
                                  double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  auto lambda = [&](double x, double y) {
    double v = mu_bar / (two_pi * deviation * deviation) *
               std::exp(-(x * x + y * y) / (2.0 * deviation * deviation));
    for (const auto& e : history) {
      if (!(e.t < t)) continue;
      v += theta * omega * std::exp(-omega * (t - e.t)) *
           std::exp(-(x - e.x) * (x - e.x) / (2.0 * sx * sx)) *
           std::exp(-(y - e.y) * (y - e.y) / (2.0 * sy * sy));
    }
    return v;
  };
  std::vector<double> bx, by;
  for (const auto& e : history) {
    for (double k : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
      bx.push_back(e.x + k * sx);
      by.push_back(e.y + k * sy);
    }
  }
  auto inner = [&](double y) {
    return integrate([&](double x) { return lambda(x, y); }, x_lo, x_hi, bx, 1e-11);
  };
  return integrate(inner, y_lo, y_hi, by, 1e-10);
}

}  // namespace oracle
