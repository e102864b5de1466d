#pragma once

// Maximum-likelihood fitting of SeppParams by expectation-maximisation over
// the latent branching structure.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hotspot/model.hpp"

namespace hotspot {

struct FitWindow {
  double start = 0.0;
  double end = 1.0;
  double length() const { return end - start; }
};

struct EmOptions {
  double tol = 1e-4;    // max relative parameter change
  int max_iter = 200;
  /// Scale the offspring compensator by the kernel mass that falls inside
  /// the domain and before the window end.
  bool edge_correction = false;
  double background_deviation = kBackgroundDeviationKm;
  /// Parent pairs whose kernel value is below this fraction of its peak
  /// theta*omega are skipped.
  double prune_ratio = 1e-6;
  /// Squared-extrapolation acceleration (SQUAREM) with a monotone safeguard;
  /// every recorded iterate is still the image of an EM map.
  bool accelerate = false;
};

// Row-compressed triggering probabilities: row i holds P(u_i = 0) and the
// admissible parents j < i with P(u_i = j).
struct BranchingProbabilities {
  std::vector<double> background;      // P(u_i = 0)
  std::vector<std::size_t> row_start;  // size n + 1
  std::vector<std::uint32_t> parent;
  std::vector<double> prob;

  std::size_t size() const { return background.size(); }
  double row_sum(std::size_t i) const;
  /// P(u_i = j); zero when j is not an admissible parent of i.
  double probability(std::size_t i, std::size_t j) const;
};

// Weighted sufficient statistics of one E-step.
struct BranchingStats {
  std::size_t n = 0;
  double background = 0.0;        // sum P(u_i = 0)
  double background_r2 = 0.0;     // sum P(u_i = 0) (x_i^2 + y_i^2)
  double triggered = 0.0;         // sum P(u_i = j)
  double triggered_dt = 0.0;      // sum P(u_i = j) (t_i - t_j)
  double triggered_dx2 = 0.0;
  double triggered_dy2 = 0.0;
  double log_intensity = 0.0;     // sum log lambda(x_i, y_i, t_i)
};

struct FitReport {
  SeppParams params;
  int iterations = 0;  // EM maps applied
  bool converged = false;
  /// Observed-data log-likelihood at the initial and every updated iterate.
  std::vector<double> loglik;
  /// Expected complete-data log-likelihood maximised by each M-step.
  std::vector<double> expected_loglik;
  /// Parameter iterates matching loglik.
  std::vector<SeppParams> trace;

  void write_csv(std::ostream& out) const;
};

/// Default starting point: half the events on the background, m = 0.3,
/// omega = 0.1/day, sigma = 0.2 km.
SeppParams default_initial_params(std::size_t n, const SpatialDomain& domain,
                                  const FitWindow& window,
                                  double deviation = kBackgroundDeviationKm);

BranchingProbabilities e_step(const SeppParams& params,
                              std::span<const Event> events,
                              const SpatialDomain& domain,
                              const EmOptions& options = {});

BranchingStats summarize(const BranchingProbabilities& branching,
                         std::span<const Event> events);

/// Closed-form weighted maximum-likelihood update. Offspring parameters are
/// held at `previous` when no probability mass sits on triggered pairs.
SeppParams m_step(const BranchingStats& stats, const SpatialDomain& domain,
                  const FitWindow& window, const SeppParams& previous,
                  const EmOptions& options = {},
                  std::span<const Event> events = {});
SeppParams m_step(const BranchingProbabilities& branching,
                  std::span<const Event> events, const SpatialDomain& domain,
                  const FitWindow& window, const SeppParams& previous,
                  const EmOptions& options = {});

/// Expected complete-data log-likelihood under the given branching weights.
double expected_loglik(const SeppParams& params,
                       const BranchingProbabilities& branching,
                       std::span<const Event> events,
                       const SpatialDomain& domain, const FitWindow& window,
                       const EmOptions& options = {});

/// Observed-data log-likelihood sum log lambda_i - compensator.
double observed_loglik(const SeppParams& params, std::span<const Event> events,
                       const SpatialDomain& domain, const FitWindow& window,
                       const EmOptions& options = {});

/// Integral of lambda over the domain and the window.
double compensator(const SeppParams& params, std::span<const Event> events,
                   const SpatialDomain& domain, const FitWindow& window,
                   const EmOptions& options = {});

/// Alternates E and M steps until the largest relative parameter change is
/// below options.tol or options.max_iter EM maps have been applied.
FitReport fit(std::span<const Event> events, const SpatialDomain& domain,
              const FitWindow& window, const SeppParams& init,
              const EmOptions& options = {});

}  // namespace hotspot
