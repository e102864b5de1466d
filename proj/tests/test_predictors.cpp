#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hotspot/predictors.hpp"

using namespace hotspot;

namespace {

// Direct weighted average of a count series (oldest first).
double weighted_average(const std::vector<double>& series, double beta) {
  double num = 0, den = 0;
  const std::size_t n = series.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(-beta * static_cast<double>(n - 1 - k));
    num += w * series[k];
    den += w;
  }
  return num / den;
}

double direct_mse(const std::vector<std::vector<double>>& days, double beta) {
  double sum = 0;
  std::size_t terms = 0;
  const std::size_t cells = days.front().size();
  for (std::size_t d = 1; d < days.size(); ++d) {
    for (std::size_t c = 0; c < cells; ++c) {
      std::vector<double> past;
      for (std::size_t k = 0; k < d; ++k) past.push_back(days[k][c]);
      const double e = weighted_average(past, beta) - days[d][c];
      sum += e * e;
      ++terms;
    }
  }
  return sum / static_cast<double>(terms);
}

template <class P>
concept AcceptsReported = requires(P p, ReportedEvents e) { p.observe_day(0.0, e); };

}  // namespace

TEST_CASE("model variants") {
  CHECK(ModelVariant::all().size() == 6);
  std::vector<std::string> labels;
  for (const auto& v : ModelVariant::all()) labels.push_back(v.label());
  CHECK(labels == std::vector<std::string>{"S1", "S2", "S3", "M1", "M2", "M3"});
  CHECK(ModelVariant::parse("s3") == ModelVariant{ModelFamily::sepp, DataSource::reported, true});
  CHECK(ModelVariant::parse("M1") == ModelVariant{ModelFamily::mavg, DataSource::full, false});
  CHECK_THROWS_AS(ModelVariant::parse("S4"), std::invalid_argument);
  CHECK_THROWS_AS((ModelVariant{ModelFamily::sepp, DataSource::full, true}.validate()),
                  std::invalid_argument);

  const auto v = parse_variants("M2, S1,M2");
  REQUIRE(v.size() == 2);
  CHECK(v[0].label() == "S1");
  CHECK(v[1].label() == "M2");
  CHECK_THROWS(parse_variants(""));
}

TEST_CASE("sepp day prediction") {
  const SpatialDomain d = SpatialDomain::centered(5, 5, 1, 100);
  const SeppParams p{20, theta_for_offspring_mean(0.5, 0.2, 0.2), 0.3, 0.2, 0.2};
  const CellPredictions empty = sepp_predict_day(p, {}, d, 10);
  const std::size_t centre = d.cell_index(2, 2);
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    CHECK(empty.values[c] > 0);
    if (c != centre) CHECK(empty.values[c] < empty.values[centre]);
    CHECK(empty.values[c] == doctest::Approx(cell_integral(IntensityModel::fitted(p), {}, d.cell(c), 10)));
  }

  const std::vector<Event> h{{0.7, -1.2, 8.5}, {0.8, -1.1, 9.2}};
  const CellPredictions with = sepp_predict_day(p, h, d, 10);
  const std::size_t hit = d.cell_of(0.7, -1.2);
  CHECK(with.values[hit] > empty.values[hit]);
  double sum = 0, bound = p.mu_bar;
  for (double v : with.values) sum += v;
  for (const Event& e : h) bound += offspring_mean(p) * p.omega * std::exp(-p.omega * (10 - e.t));
  CHECK(sum <= bound + 1e-9);
  CHECK_THROWS_AS(sepp_predict_day(p, h, d, 9.2), ContractViolation);
}

TEST_CASE("observe_day") {
  const std::vector<Event> h{{0, 0, 0.5}};
  CHECK(observe_day(h, 1, {}) == h);
  const std::vector<Event> batch{{0, 0, 1.2}, {1, 1, 1.9}};
  const auto grown = observe_day(h, 1, batch);
  CHECK(grown.size() == 3);
  CHECK_THROWS_AS(observe_day(h, 2, batch), std::invalid_argument);
  const std::vector<Event> late{{0, 0, 2.0}};
  CHECK_THROWS_AS(observe_day(h, 1, late), std::invalid_argument);

  // Day t's prediction does not depend on day t's events.
  const SpatialDomain d = SpatialDomain::centered(4, 4, 1, 10);
  const SeppParams p{5, theta_for_offspring_mean(0.5, 0.3, 0.3), 0.3, 0.3, 0.3};
  const auto before = sepp_predict_day(p, h, d, 1);
  const auto after = sepp_predict_day(p, grown, d, 2);
  CHECK(before.values != after.values);
  CHECK(sepp_predict_day(p, observe_day(h, 1, {}), d, 1).values == before.values);
}

TEST_CASE("incremental forecaster matches the direct sum") {
  const SpatialDomain d = SpatialDomain::centered(8, 6, 1, 100);
  const SeppParams p{12, theta_for_offspring_mean(0.7, 0.4, 0.3), 0.15, 0.4, 0.3};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ux(-4, 4), uy(-3, 3), u01(0, 1);
  SeppForecaster f(p, d);
  std::vector<Event> history;
  for (int day = 0; day < 30; ++day) {
    const auto fast = f.predict(day);
    const auto slow = sepp_predict_day(p, history, d, day);
    for (std::size_t c = 0; c < d.cell_count(); ++c) {
      CHECK(fast.values[c] == doctest::Approx(slow.values[c]).epsilon(1e-10));
    }
    std::vector<Event> batch;
    const int n = static_cast<int>(u01(rng) * 5);
    for (int k = 0; k < n; ++k) batch.push_back({ux(rng), uy(rng), day + u01(rng)});
    std::sort(batch.begin(), batch.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    f.observe(batch);
    history = observe_day(history, day, batch);
  }
  CHECK(f.history_size() == history.size());
  const std::vector<Event> stale{{0, 0, 1}};
  CHECK_THROWS_AS(f.observe(stale), ContractViolation);
}

TEST_CASE("typed predictors") {
  static_assert(AcceptsReported<SeppPredictor<DataSource::reported>>);
  static_assert(!AcceptsReported<SeppPredictor<DataSource::full>>);
  static_assert(!AcceptsReported<MavgPredictor<DataSource::full>>);

  const SpatialDomain d = SpatialDomain::centered(4, 4, 1, 10);
  MavgPredictor<DataSource::reported> m(0.5, d);
  m.observe_day(0, ReportedEvents({{0.5, 0.5, 0.2}, {0.5, 0.6, 0.7}}));
  const auto pred = m.predict(1);
  CHECK(pred.values[d.cell_of(0.5, 0.5)] == 2.0);
  CHECK_THROWS_AS(m.observe_day(1, ReportedEvents({{0.5, 0.5, 2.5}})), std::invalid_argument);

  SeppPredictor<DataSource::full> s(SeppParams{1, 0.5, 0.2, 0.2, 0.2}, d);
  s.observe_day(0, FullEvents({{0.5, 0.5, 0.2}}));
  CHECK(s.history_size() == 1);
}

TEST_CASE("moving average state") {
  MavgState s(std::log(2.0), 1);
  CHECK_THROWS_AS(mavg_predict_day(s, 0), std::logic_error);
  s.observe(std::vector<double>{2});
  s.observe(std::vector<double>{0});
  CHECK(s.forecast(0) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(s.forecast(0) == doctest::Approx(weighted_average({2, 0}, std::log(2.0))));

  MavgState sharp(50.0, 1);
  for (double c : {4.0, 1.0, 7.0}) sharp.observe(std::vector<double>{c});
  CHECK(sharp.forecast(0) == doctest::Approx(7.0));

  MavgState zero(0.3, 3);
  for (int k = 0; k < 5; ++k) zero.observe(std::vector<double>(3, 0.0));
  CHECK(mavg_predict_day(zero, 5).values == std::vector<double>(3, 0.0));

  // Long series: recursion equals the explicit sum and stays within the range.
  std::mt19937_64 rng(8);
  std::poisson_distribution<int> pois(3.0);
  std::vector<double> series;
  MavgState r(0.37, 1);
  for (int k = 0; k < 400; ++k) {
    series.push_back(pois(rng));
    r.observe(std::vector<double>{series.back()});
  }
  CHECK(r.forecast(0) == doctest::Approx(weighted_average(series, 0.37)).epsilon(1e-12));
  CHECK(r.forecast(0) <= *std::max_element(series.begin(), series.end()));
  CHECK(r.days_observed() == 400);
}

TEST_CASE("bandwidth selection") {
  const auto grid = default_beta_grid();
  REQUIRE(grid.size() == 25);
  CHECK(grid.front() == doctest::Approx(0.02));
  CHECK(grid.back() == doctest::Approx(2.0));

  std::vector<std::vector<double>> constant(20, std::vector<double>(3, 4.0));
  CHECK(mavg_fit_bandwidth(constant, grid) == grid.front());

  std::vector<std::vector<double>> alternating;
  for (int k = 0; k < 40; ++k) alternating.push_back({k % 2 ? 0.0 : 5.0, k % 2 ? 3.0 : 1.0});
  double best = grid.front(), best_mse = std::numeric_limits<double>::infinity();
  for (double b : grid) {
    const double e = direct_mse(alternating, b);
    CHECK(mavg_forecast_mse(alternating, b) == doctest::Approx(e).epsilon(1e-12));
    if (e < best_mse) {
      best_mse = e;
      best = b;
    }
  }
  CHECK(mavg_fit_bandwidth(alternating, grid) == best);
  // Weight on yesterday is the worst choice for an alternating series.
  CHECK(best == grid.front());

  const std::vector<double> one{0.7};
  CHECK(mavg_fit_bandwidth(alternating, one) == 0.7);
  CHECK_THROWS(mavg_fit_bandwidth(alternating, std::vector<double>{}));
  CHECK_THROWS(mavg_fit_bandwidth({{1.0}}, grid));

  // Persistent cell levels plus noise: a longer memory wins.
  std::mt19937_64 rng(2);
  std::vector<std::vector<double>> levels(60, std::vector<double>(4));
  for (auto& day : levels) {
    for (std::size_t c = 0; c < 4; ++c) day[c] = std::poisson_distribution<int>(1.0 + 3.0 * c)(rng);
  }
  CHECK(mavg_fit_bandwidth(levels, grid) < 0.5);

  const SpatialDomain d = SpatialDomain::centered(2, 1, 1, 10);
  const std::vector<Event> ev{{-0.5, 0, 0.2}, {0.5, 0, 0.4}, {0.5, 0, 1.1}, {0.5, 0, 3.0}};
  const auto counts = daily_cell_counts(ev, d, 0, 2);
  CHECK(counts == std::vector<std::vector<double>>{{1, 1}, {0, 1}});
}

TEST_CASE("rescaling") {
  const SpatialDomain d = SpatialDomain::centered(3, 1, 1, 10);
  const DistrictTable t({{1, "low", 10, 0.1, 0.13}, {2, "full", 10, 0.1, 1.0}});
  const DistrictMap map(d, {1, 1, 2}, t);
  const CellPredictions p{4, {0.26, 0.13, 0.5}};
  const auto r = rescale(p, map, t);
  CHECK(r.day == 4);
  CHECK(r.values[0] == doctest::Approx(2.0));
  CHECK(r.values[1] == doctest::Approx(1.0));
  CHECK(r.values[2] == 0.5);
  // Ordering within a district is unchanged.
  CHECK(select_hotspots(r, 1).cells == std::vector<std::size_t>{0});
  CHECK(select_hotspots(p, 1).cells == std::vector<std::size_t>{2});
}

TEST_CASE("hot spot selection") {
  CHECK(select_hotspots({0, {3, 1, 2}}, 2).cells == std::vector<std::size_t>{0, 2});
  CHECK(select_hotspots({0, {2, 2, 1}}, 1).cells == std::vector<std::size_t>{0});
  CHECK(select_hotspots({0, {1, 2, 2}}, 1).cells == std::vector<std::size_t>{1});
  CHECK(select_hotspots({0, {1, 5}}, 5).cells == std::vector<std::size_t>{0, 1});
  CHECK_THROWS(select_hotspots({0, {1, 5}}, 0));
  CHECK_THROWS(select_hotspots({0, {1, std::nan("")}}, 1));

  const HotspotSet h = select_hotspots({3, {0.1, 0.9, 0.5, 0.9, 0.2}}, 3);
  CHECK(h.day == 3);
  CHECK(h.cells == std::vector<std::size_t>{1, 2, 3});
  CHECK(h.contains(2));
  CHECK_FALSE(h.contains(0));
}
