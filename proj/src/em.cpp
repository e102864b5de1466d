#include "hotspot/em.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "hotspot/csv.hpp"

namespace hotspot {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Spatial buckets of time-sorted events used to enumerate candidate parents
// within a bounded space-time neighbourhood. Bucket contents are stored
// contiguously so a scan reads memory sequentially.
class NeighbourIndex {
 public:
  struct Entry {
    double t, x, y;
    std::uint32_t index;
  };

  NeighbourIndex(std::span<const Event> events, const SpatialDomain& domain,
                 double reach_x, double reach_y) {
    x0_ = domain.x_min();
    y0_ = domain.y_min();
    // Buckets of half the reach (at most 512 per axis); a query scans the
    // 5 x 5 block around its own bucket.
    bw_ = std::max(reach_x / kSpan, domain.width() / 512.0);
    bh_ = std::max(reach_y / kSpan, domain.height() / 512.0);
    nbx_ = std::max(1, static_cast<int>(std::ceil(domain.width() / bw_)));
    nby_ = std::max(1, static_cast<int>(std::ceil(domain.height() / bh_)));
    const std::size_t nb = static_cast<std::size_t>(nbx_) * nby_;
    std::vector<std::uint32_t> of(events.size());
    offset_.assign(nb + 1, 0);
    for (std::size_t i = 0; i < events.size(); ++i) {
      of[i] = static_cast<std::uint32_t>(bucket(bx(events[i].x), by(events[i].y)));
      ++offset_[of[i] + 1];
    }
    for (std::size_t b = 0; b < nb; ++b) offset_[b + 1] += offset_[b];
    entries_.resize(events.size());
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (std::uint32_t i = 0; i < events.size(); ++i) {
      entries_[fill[of[i]]++] = {events[i].t, events[i].x, events[i].y, i};
    }
  }

  // Calls f(entry) for every event in neighbouring buckets with
  // t_min <= t < t_max.
  template <class F>
  void for_each(const Event& e, double t_min, double t_max, F&& f) const {
    const int cx = bx(e.x), cy = by(e.y);
    const int x_lo = std::max(0, cx - kSpan), x_hi = std::min(nbx_ - 1, cx + kSpan);
    for (int yy = std::max(0, cy - kSpan); yy <= std::min(nby_ - 1, cy + kSpan); ++yy) {
      for (int xx = x_lo; xx <= x_hi; ++xx) {
        const std::size_t b = bucket(xx, yy);
        const Entry* first = entries_.data() + offset_[b];
        const Entry* last = entries_.data() + offset_[b + 1];
        const Entry* it = std::lower_bound(
            first, last, t_min, [](const Entry& a, double t) { return a.t < t; });
        for (; it != last && it->t < t_max; ++it) f(*it);
      }
    }
  }

 private:
  static constexpr int kSpan = 2;

  int bx(double x) const {
    return std::clamp(static_cast<int>((x - x0_) / bw_), 0, nbx_ - 1);
  }
  int by(double y) const {
    return std::clamp(static_cast<int>((y - y0_) / bh_), 0, nby_ - 1);
  }
  std::size_t bucket(int x, int y) const {
    return static_cast<std::size_t>(y) * nbx_ + x;
  }

  double x0_ = 0, y0_ = 0, bw_ = 1, bh_ = 1;
  int nbx_ = 1, nby_ = 1;
  std::vector<std::size_t> offset_;
  std::vector<Entry> entries_;
};

// For each event i in order: calls on_pair(parent, g, dt, dx, dy) for every
// admissible (unpruned) parent, then on_row(i, mu_i).
template <class PairFn, class RowFn>
void scan_pairs(const SeppParams& params, std::span<const Event> events,
                const SpatialDomain& domain, const EmOptions& options,
                PairFn&& on_pair, RowFn&& on_row) {
  params.validate();
  require_time_sorted(events);
  const double dev = options.background_deviation;
  const double amplitude = params.theta * params.omega;
  // Pairs with omega*dt + dx^2/(2sx^2) + dy^2/(2sy^2) > reach are pruned;
  // each parent then loses a fraction (1 + reach) e^-reach of its kernel mass.
  const double reach = -std::log(options.prune_ratio);

  if (!(reach > 0.0)) {
    for (std::uint32_t i = 0; i < events.size(); ++i) {
      on_row(i, background_intensity(params, events[i].x, events[i].y, dev));
    }
    return;
  }
  const double max_dt = reach / params.omega;
  const double inv2sx = 1.0 / (2.0 * params.sigma_x * params.sigma_x);
  const double inv2sy = 1.0 / (2.0 * params.sigma_y * params.sigma_y);
  const NeighbourIndex index(events, domain,
                             params.sigma_x * std::sqrt(2.0 * reach),
                             params.sigma_y * std::sqrt(2.0 * reach));
  for (std::uint32_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    index.for_each(e, e.t - max_dt, e.t, [&](const NeighbourIndex::Entry& p) {
      const double dx = e.x - p.x, dy = e.y - p.y, dt = e.t - p.t;
      const double exponent = params.omega * dt + dx * dx * inv2sx + dy * dy * inv2sy;
      if (exponent <= reach) on_pair(p.index, amplitude * std::exp(-exponent), dt, dx, dy);
    });
    on_row(i, background_intensity(params, e.x, e.y, dev));
  }
}

// Fraction of each event's offspring kernel falling inside the domain and
// before the window end.
double edge_factor(const SeppParams& params, const Event& e,
                   const SpatialDomain& domain, const FitWindow& window) {
  const double time_part = 1.0 - std::exp(-params.omega * (window.end - e.t));
  return time_part *
         gaussian_interval_mass(domain.x_min(), domain.x_max(), e.x,
                                params.sigma_x) *
         gaussian_interval_mass(domain.y_min(), domain.y_max(), e.y,
                                params.sigma_y);
}

double offspring_exposure(const SeppParams& params,
                          std::span<const Event> events,
                          const SpatialDomain& domain, const FitWindow& window,
                          const EmOptions& options) {
  if (!options.edge_correction) return static_cast<double>(events.size());
  double sum = 0.0;
  for (const Event& e : events) sum += edge_factor(params, e, domain, window);
  return sum;
}

// Sufficient statistics without materialising the rows: p_ij = g_ij / lambda_i,
// so g-weighted moments are accumulated per row and divided once.
BranchingStats stats_pass(const SeppParams& params,
                          std::span<const Event> events,
                          const SpatialDomain& domain,
                          const EmOptions& options) {
  BranchingStats s;
  s.n = events.size();
  double g_sum = 0.0, g_dt = 0.0, g_dx2 = 0.0, g_dy2 = 0.0;
  scan_pairs(
      params, events, domain, options,
      [&](std::uint32_t, double g, double dt, double dx, double dy) {
        g_sum += g;
        g_dt += g * dt;
        g_dx2 += g * dx * dx;
        g_dy2 += g * dy * dy;
      },
      [&](std::uint32_t i, double mu) {
        const double lambda = mu + g_sum;
        const double inv = 1.0 / lambda;
        const Event& e = events[i];
        s.log_intensity += std::log(lambda);
        s.background += mu * inv;
        s.background_r2 += mu * inv * (e.x * e.x + e.y * e.y);
        s.triggered += g_sum * inv;
        s.triggered_dt += g_dt * inv;
        s.triggered_dx2 += g_dx2 * inv;
        s.triggered_dy2 += g_dy2 * inv;
        g_sum = g_dt = g_dx2 = g_dy2 = 0.0;
      });
  return s;
}

double expected_from_stats(const SeppParams& params, const BranchingStats& s,
                           std::span<const Event> events,
                           const SpatialDomain& domain, const FitWindow& window,
                           const EmOptions& options) {
  const double dev = options.background_deviation;
  double value = s.background * std::log(params.mu_bar / (kTwoPi * dev * dev)) -
                 s.background_r2 / (2.0 * dev * dev);
  if (s.triggered > 0.0) {
    value += s.triggered * std::log(params.theta * params.omega) -
             params.omega * s.triggered_dt -
             s.triggered_dx2 / (2.0 * params.sigma_x * params.sigma_x) -
             s.triggered_dy2 / (2.0 * params.sigma_y * params.sigma_y);
  }
  return value - compensator(params, events, domain, window, options);
}

// The extrapolation may leave the positive orthant.
bool positive_finite(const SeppParams& p) {
  for (double v : {p.mu_bar, p.theta, p.omega, p.sigma_x, p.sigma_y}) {
    if (!(std::isfinite(v) && v > 0.0)) return false;
  }
  return true;
}

double max_relative_change(const SeppParams& a, const SeppParams& b) {
  const double pa[] = {a.mu_bar, a.theta, a.omega, a.sigma_x, a.sigma_y};
  const double pb[] = {b.mu_bar, b.theta, b.omega, b.sigma_x, b.sigma_y};
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    worst = std::max(worst, std::abs(pb[k] - pa[k]) / std::abs(pa[k]));
  }
  return worst;
}

}  // namespace

double BranchingProbabilities::row_sum(std::size_t i) const {
  double s = background.at(i);
  for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k) s += prob[k];
  return s;
}

double BranchingProbabilities::probability(std::size_t i, std::size_t j) const {
  for (std::size_t k = row_start.at(i); k < row_start.at(i + 1); ++k) {
    if (parent[k] == j) return prob[k];
  }
  return 0.0;
}

void FitReport::write_csv(std::ostream& out) const {
  out << "iteration,loglik,mu_bar,theta,omega,sigma_x,sigma_y\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const SeppParams& p = trace[k];
    out << k << ',' << csv::format(loglik[k]) << ',' << csv::format(p.mu_bar)
        << ',' << csv::format(p.theta) << ',' << csv::format(p.omega) << ','
        << csv::format(p.sigma_x) << ',' << csv::format(p.sigma_y) << '\n';
  }
}

SeppParams default_initial_params(std::size_t n, const SpatialDomain& domain,
                                  const FitWindow& window, double deviation) {
  SeppParams p;
  const double mass = gaussian_domain_mass(domain, deviation);
  p.mu_bar = std::max(0.5 * static_cast<double>(n), 1.0) /
             (window.length() * mass);
  p.omega = 0.1;
  p.sigma_x = 0.2;
  p.sigma_y = 0.2;
  p.theta = theta_for_offspring_mean(0.3, p.sigma_x, p.sigma_y);
  return p;
}

BranchingProbabilities e_step(const SeppParams& params,
                              std::span<const Event> events,
                              const SpatialDomain& domain,
                              const EmOptions& options) {
  BranchingProbabilities out;
  out.background.resize(events.size());
  out.row_start.reserve(events.size() + 1);
  out.row_start.push_back(0);
  std::vector<std::pair<std::uint32_t, double>> row;
  scan_pairs(
      params, events, domain, options,
      [&](std::uint32_t j, double g, double, double, double) { row.emplace_back(j, g); },
      [&](std::uint32_t, double mu) {
        std::sort(row.begin(), row.end());
        double lambda = mu;
        for (const auto& [j, g] : row) lambda += g;
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
          throw std::domain_error("e_step: degenerate intensity");
        }
        out.background[out.row_start.size() - 1] = mu / lambda;
        for (const auto& [j, g] : row) {
          out.parent.push_back(j);
          out.prob.push_back(g / lambda);
        }
        out.row_start.push_back(out.parent.size());
        row.clear();
      });
  return out;
}

BranchingStats summarize(const BranchingProbabilities& branching,
                         std::span<const Event> events) {
  if (branching.size() != events.size()) {
    throw std::invalid_argument("summarize: branching does not match events");
  }
  BranchingStats s;
  s.n = events.size();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const double p0 = branching.background[i];
    s.background += p0;
    s.background_r2 += p0 * (e.x * e.x + e.y * e.y);
    for (std::size_t k = branching.row_start[i]; k < branching.row_start[i + 1]; ++k) {
      const Event& q = events[branching.parent[k]];
      const double p = branching.prob[k];
      const double dx = e.x - q.x, dy = e.y - q.y;
      s.triggered += p;
      s.triggered_dt += p * (e.t - q.t);
      s.triggered_dx2 += p * dx * dx;
      s.triggered_dy2 += p * dy * dy;
    }
  }
  s.log_intensity = std::numeric_limits<double>::quiet_NaN();
  return s;
}

SeppParams m_step(const BranchingStats& stats, const SpatialDomain& domain,
                  const FitWindow& window, const SeppParams& previous,
                  const EmOptions& options, std::span<const Event> events) {
  SeppParams next = previous;
  const double mass = gaussian_domain_mass(domain, options.background_deviation);
  next.mu_bar = stats.background / (window.length() * mass);
  if (stats.triggered > 0.0 && stats.triggered_dt > 0.0 &&
      stats.triggered_dx2 > 0.0 && stats.triggered_dy2 > 0.0) {
    next.omega = stats.triggered / stats.triggered_dt;
    next.sigma_x = std::sqrt(stats.triggered_dx2 / stats.triggered);
    next.sigma_y = std::sqrt(stats.triggered_dy2 / stats.triggered);
    double exposure = static_cast<double>(stats.n);
    if (options.edge_correction && !events.empty()) {
      exposure = offspring_exposure(next, events, domain, window, options);
    }
    next.theta = stats.triggered / (kTwoPi * next.sigma_x * next.sigma_y * exposure);
  }
  return next;
}

SeppParams m_step(const BranchingProbabilities& branching,
                  std::span<const Event> events, const SpatialDomain& domain,
                  const FitWindow& window, const SeppParams& previous,
                  const EmOptions& options) {
  return m_step(summarize(branching, events), domain, window, previous, options,
                events);
}

double compensator(const SeppParams& params, std::span<const Event> events,
                   const SpatialDomain& domain, const FitWindow& window,
                   const EmOptions& options) {
  const double mass = gaussian_domain_mass(domain, options.background_deviation);
  return params.mu_bar * window.length() * mass +
         offspring_mean(params) *
             offspring_exposure(params, events, domain, window, options);
}

double expected_loglik(const SeppParams& params,
                       const BranchingProbabilities& branching,
                       std::span<const Event> events,
                       const SpatialDomain& domain, const FitWindow& window,
                       const EmOptions& options) {
  return expected_from_stats(params, summarize(branching, events), events,
                             domain, window, options);
}

double observed_loglik(const SeppParams& params, std::span<const Event> events,
                       const SpatialDomain& domain, const FitWindow& window,
                       const EmOptions& options) {
  const BranchingStats s = stats_pass(params, events, domain, options);
  return s.log_intensity - compensator(params, events, domain, window, options);
}

namespace {

struct Iterate {
  SeppParams params;
  BranchingStats stats;
  double loglik = 0.0;
};

std::array<double, 5> log_params(const SeppParams& p) {
  return {std::log(p.mu_bar), std::log(p.theta), std::log(p.omega),
          std::log(p.sigma_x), std::log(p.sigma_y)};
}

}  // namespace

FitReport fit(std::span<const Event> events, const SpatialDomain& domain,
              const FitWindow& window, const SeppParams& init,
              const EmOptions& options) {
  if (events.empty()) throw std::invalid_argument("fit: no events");
  if (!(window.length() > 0.0)) throw std::invalid_argument("fit: empty window");
  init.validate();

  auto evaluate = [&](const SeppParams& p) {
    Iterate it{p, stats_pass(p, events, domain, options), 0.0};
    it.loglik = it.stats.log_intensity - compensator(p, events, domain, window, options);
    return it;
  };

  FitReport report;
  Iterate current = evaluate(init);
  report.trace.push_back(current.params);
  report.loglik.push_back(current.loglik);

  // One EM map from `from`; records Q at the new parameters.
  auto em_map = [&](const Iterate& from) {
    const SeppParams next =
        m_step(from.stats, domain, window, from.params, options, events);
    const double q = expected_from_stats(next, from.stats, events, domain, window, options);
    ++report.iterations;
    return std::pair{evaluate(next), q};
  };
  // Appends an accepted iterate; returns true once converged.
  auto accept = [&](std::pair<Iterate, double> step) {
    const double change = max_relative_change(current.params, step.first.params);
    current = std::move(step.first);
    report.expected_loglik.push_back(step.second);
    report.trace.push_back(current.params);
    report.loglik.push_back(current.loglik);
    return change < options.tol;
  };
  auto budget_left = [&] { return report.iterations < options.max_iter; };

  while (budget_left() && !report.converged) {
    if (!options.accelerate) {
      report.converged = accept(em_map(current));
      continue;
    }
    const auto x0 = log_params(current.params);
    if ((report.converged = accept(em_map(current))) || !budget_left()) break;
    const auto x1 = log_params(current.params);
    if ((report.converged = accept(em_map(current))) || !budget_left()) break;
    const auto x2 = log_params(current.params);

    double rr = 0.0, vv = 0.0;
    std::array<double, 5> r{}, v{};
    for (int k = 0; k < 5; ++k) {
      r[k] = x1[k] - x0[k];
      v[k] = x2[k] - 2.0 * x1[k] + x0[k];
      rr += r[k] * r[k];
      vv += v[k] * v[k];
    }
    if (!(vv > 0.0)) continue;
    const double alpha = std::min(-1.0, -std::sqrt(rr / vv));
    if (alpha == -1.0) continue;  // extrapolation would land on x2
    std::array<double, 5> y{};
    for (int k = 0; k < 5; ++k) y[k] = x0[k] - 2.0 * alpha * r[k] + alpha * alpha * v[k];
    SeppParams jump{std::exp(y[0]), std::exp(y[1]), std::exp(y[2]),
                    std::exp(y[3]), std::exp(y[4])};
    if (!positive_finite(jump)) continue;

    Iterate landed;
    try {
      landed = evaluate(jump);
    } catch (const std::domain_error&) {
      continue;
    }
    if (!std::isfinite(landed.loglik)) continue;
    auto stabilised = em_map(landed);
    if (std::isfinite(stabilised.first.loglik) &&
        stabilised.first.loglik >= current.loglik) {
      report.converged = accept(std::move(stabilised));
    }
  }
  report.params = current.params;
  return report;
}

}  // namespace hotspot
