#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "hotspot/experiment.hpp"
#include "hotspot/simulator.hpp"

using namespace hotspot;

namespace {

StudySetup smoke_setup(ExperimentConfig& config) {
  config = ExperimentConfig::load(HOTSPOT_TEST_DATA "/smoke.json");
  return prepare_setup(config);
}

IntensityModel single_centre(double rate, double bandwidth, double m, double omega,
                             double sigma) {
  auto mix = MixtureBackground::equal_weights({{0, 0}}, bandwidth, rate);
  return IntensityModel::generator(mix, m, omega, sigma, sigma);
}

}  // namespace

TEST_CASE("bogota district table") {
  const DistrictTable t = DistrictTable::bogota();
  REQUIRE(t.size() == 19);
  const DistrictRecord& u = t.by_id(18);
  CHECK(u.name == "Usaquén");
  CHECK(u.population == 501999);
  CHECK(u.victimization_rate == doctest::Approx(0.18));
  CHECK(u.reporting_rate == doctest::Approx(0.13));
  CHECK(t.by_id(1).population == 109176);
  CHECK(t.by_id(1).reporting_rate == doctest::Approx(0.33));
  CHECK(t.by_id(15).victimization_rate == doctest::Approx(0.05));
  CHECK(t.by_id(9).population == 1088443);

  double lo = 1, hi = 0;
  for (const auto& r : t.rows()) {
    lo = std::min(lo, r.reporting_rate);
    hi = std::max(hi, r.reporting_rate);
  }
  CHECK(lo == doctest::Approx(0.13));
  CHECK(hi == doctest::Approx(0.33));

  std::stringstream ss;
  t.write_csv(ss);
  const DistrictTable back = DistrictTable::read_csv(ss);
  REQUIRE(back.size() == 19);
  for (std::size_t k = 0; k < 19; ++k) {
    CHECK(back.at(k).id == t.at(k).id);
    CHECK(back.at(k).name == t.at(k).name);
    CHECK(back.at(k).population == t.at(k).population);
    CHECK(back.at(k).victimization_rate == t.at(k).victimization_rate);
    CHECK(back.at(k).reporting_rate == t.at(k).reporting_rate);
  }
}

TEST_CASE("district table validation") {
  CHECK_THROWS_AS(DistrictTable({{1, "a", 10, 0.1, 0.1}, {1, "b", 10, 0.1, 0.1}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DistrictTable({{1, "a", 0, 0.1, 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(DistrictTable({{1, "a", 10, 1.5, 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(DistrictTable({{1, "a", 10, 0.1, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DistrictTable::bogota().position_of(42), std::out_of_range);

  std::istringstream bad_header("id,name,population\n1,a,10\n");
  CHECK_THROWS(DistrictTable::read_csv(bad_header));
}

TEST_CASE("voronoi district map") {
  const SimConfig sim;
  const SpatialDomain domain = sim.domain();
  const DistrictTable t = DistrictTable::bogota();
  const DistrictMap map = DistrictMap::voronoi(domain, t, sim.generator.layout_seed);
  REQUIRE(map.cell_count() == 870);

  std::size_t total = 0;
  for (const auto& r : t.rows()) {
    CHECK(map.cells_of(r.id).size() >= 4);
    total += map.cells_of(r.id).size();
    for (std::size_t c : map.cells_of(r.id)) CHECK(map.district_of_cell(c) == r.id);
  }
  CHECK(total == 870);
  // Cell counts follow population.
  CHECK(map.cells_of(15).size() > map.cells_of(4).size());
  CHECK(map.cells_of(9).size() > map.cells_of(1).size());

  const DistrictMap again = DistrictMap::voronoi(domain, t, sim.generator.layout_seed);
  CHECK(again.assignment() == map.assignment());

  const GridCell c = domain.cell(7, 11);
  CHECK(map.district_of_point(0.5 * (c.x_lo + c.x_hi), 0.5 * (c.y_lo + c.y_hi)) ==
        map.district_of_cell(domain.cell_index(7, 11)));

  std::stringstream ss;
  map.write_csv(ss);
  const DistrictMap back = DistrictMap::read_csv(ss, domain, t);
  CHECK(back.assignment() == map.assignment());
}

TEST_CASE("district map file errors") {
  const SpatialDomain domain = SpatialDomain::centered(2, 1, 1, 10);
  const DistrictTable t({{1, "a", 10, 0.1, 0.1}, {2, "b", 10, 0.1, 0.1}});
  std::istringstream ok("ix,iy,district_id\n0,0,1\n1,0,2\n");
  CHECK(DistrictMap::read_csv(ok, domain, t).district_of_cell(1) == 2);
  std::istringstream missing("ix,iy,district_id\n0,0,1\n");
  CHECK_THROWS(DistrictMap::read_csv(missing, domain, t));
  std::istringstream unknown("ix,iy,district_id\n0,0,1\n1,0,7\n");
  CHECK_THROWS(DistrictMap::read_csv(unknown, domain, t));
  std::istringstream empty_district("ix,iy,district_id\n0,0,1\n1,0,1\n");
  CHECK_THROWS(DistrictMap::read_csv(empty_district, domain, t));
}

TEST_CASE("mixture layout") {
  const SimConfig sim;
  const auto centres = mixture_layout(sim);
  REQUIRE(centres.size() == 14);
  const SpatialDomain d = sim.domain();
  for (const auto& c : centres) CHECK(d.contains(c.x, c.y));
  const auto again = mixture_layout(sim);
  for (std::size_t k = 0; k < centres.size(); ++k) {
    CHECK(again[k].x == centres[k].x);
    CHECK(again[k].y == centres[k].y);
  }
  const IntensityModel g = make_generator(sim, 100.0);
  CHECK(g.offspring_mean() == doctest::Approx(0.3));
  CHECK(g.omega == 0.2);
}

TEST_CASE("keep probability") {
  SimConfig sim;  // population scale 1/40, time factor 12
  const DistrictRecord d{1, "x", 1600, 0.10, 0.2};
  CHECK(victimization_keep_prob(d, 96, sim) == doctest::Approx(0.5));
  CHECK(sim.survey_daily_count(d) == doctest::Approx(40 * 0.10 / 182.5));
  CHECK_THROWS_AS(victimization_keep_prob(d, 40, sim), GeneratorRateTooLow);
  CHECK_THROWS_AS(victimization_keep_prob(d, 0, sim), GeneratorRateTooLow);

  const DistrictRecord usaquen = DistrictTable::bogota().by_id(18);
  CHECK(sim.survey_daily_count(usaquen) ==
        doctest::Approx(501999.0 / 40 * 0.18 / 182.5));
}

TEST_CASE("sim config validation") {
  SimConfig sim;
  CHECK_NOTHROW(sim.validate());
  sim.time_factor = 11;
  CHECK_THROWS_AS(sim.validate(), std::invalid_argument);
  sim = SimConfig{};
  sim.eval_len = 500;
  CHECK_THROWS_AS(sim.validate(), std::invalid_argument);
  sim = SimConfig{};
  sim.generator.offspring_mean = 1.0;
  CHECK_THROWS_AS(sim.validate(), std::invalid_argument);
}

TEST_CASE("candidate sampling without offspring") {
  const IntensityModel g = single_centre(50, 2, 0.0, 1, 0.1);
  const SpatialDomain d = SpatialDomain::centered(10, 10, 1, 100);
  const double mass = std::pow(std::erf(5 / (2 * std::sqrt(2.0))), 2);
  double total = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_rng(100 + r);
    const CandidateSample s = sample_candidates(g, d, 100, rng);
    for (std::uint32_t p : s.branching.parent) CHECK_FALSE(p != 0);
    total += static_cast<double>(s.events.size());
  }
  const double expected = 50 * 100 * mass * reps;
  CHECK(std::abs(total - expected) < 4 * std::sqrt(expected));
}

TEST_CASE("candidate sampling branching structure") {
  const IntensityModel g = single_centre(5, 1, 0.5, 1.0, 0.2);
  const SpatialDomain d = SpatialDomain::centered(20, 20, 1, 2000);
  Rng rng = make_rng(9);
  const CandidateSample s = sample_candidates(g, d, 2000, rng);
  REQUIRE(s.events.size() == s.branching.parent.size());
  std::size_t background = 0;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event& e = s.events[i];
    CHECK(d.contains(e.x, e.y));
    CHECK(e.t >= 0);
    CHECK(e.t < 2000);
    if (i > 0) CHECK(s.events[i - 1].t <= e.t);
    const std::uint32_t p = s.branching.parent[i];
    if (p == 0) {
      ++background;
    } else {
      REQUIRE(p - 1 < i);
      CHECK(s.events[p - 1].t < e.t);
    }
  }
  // Total over background approaches 1 / (1 - m).
  const double ratio = static_cast<double>(s.events.size()) / static_cast<double>(background);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.05));

  Rng a = make_rng(77), b = make_rng(77);
  const auto s1 = sample_candidates(g, SpatialDomain::centered(4, 4, 1, 50), 50, a);
  const auto s2 = sample_candidates(g, SpatialDomain::centered(4, 4, 1, 50), 50, b);
  CHECK(s1.events == s2.events);
  CHECK(s1.branching.parent == s2.branching.parent);

  Rng c = make_rng(1);
  IntensityModel critical = g;
  critical.theta = 1.0 / (2 * std::numbers::pi * 0.2 * 0.2);
  CHECK_THROWS_AS(sample_candidates(critical, d, 10, c), std::invalid_argument);
}

TEST_CASE("thinning") {
  std::vector<Event> cand;
  std::vector<int> district;
  for (int i = 0; i < 400; ++i) {
    cand.push_back({0, 0, static_cast<double>(i)});
    district.push_back(i % 2 ? 1 : 2);
  }
  const DistrictTable t({{1, "a", 1, 1.0, 1.0}, {2, "b", 1, 1.0, 0.25}});
  Rng rng = make_rng(3);
  std::vector<std::uint32_t> all(400);
  std::iota(all.begin(), all.end(), 0u);
  const auto reported = thin_reported(all, district, t, rng);
  std::size_t in_a = 0, in_b = 0;
  for (std::uint32_t i : reported) (district[i] == 1 ? in_a : in_b)++;
  CHECK(in_a == 200);  // q = 1 keeps every event
  CHECK(in_b > 20);
  CHECK(in_b < 80);
  CHECK(std::is_sorted(reported.begin(), reported.end()));

  // Targets of 200 and 100 events against 200 candidates each.
  SimConfig sim;
  sim.population_scale = 1.0;
  const DistrictTable exact({{1, "a", 200.0 / 12.0, 1.0, 0.5}, {2, "b", 100.0 / 12.0, 1.0, 0.5}});
  std::vector<double> keep;
  const auto kept = thin_true(cand, district, exact, sim, rng, &keep);
  CHECK(keep[0] == doctest::Approx(1.0));
  CHECK(keep[1] == doctest::Approx(0.5));
  std::size_t ka = 0;
  for (std::uint32_t i : kept) ka += district[i] == 1;
  CHECK(ka == 200);
}

TEST_CASE("ground truth expectation") {
  const IntensityModel g = single_centre(30, 2, 0.4, 0.5, 0.3);
  const SpatialDomain d = SpatialDomain::centered(4, 4, 1, 20);
  Rng rng = make_rng(4);
  const auto s = sample_candidates(g, d, 20, rng);
  const GridCell cell = d.cell(1, 2);
  const double integral = cell_integral(g, s.events, cell, 10.0);
  CHECK(true_expected_cell_count(g, s.events, cell, 10.0, 0.5) == doctest::Approx(0.5 * integral));
  CHECK(true_expected_cell_count(g, s.events, cell, 10.0, 0.0) == 0.0);

  const DistrictTable t({{1, "west", 1, 0.1, 0.1}, {2, "east", 1, 0.1, 0.1}});
  std::vector<int> assign(d.cell_count());
  for (std::size_t c = 0; c < assign.size(); ++c) assign[c] = d.cell(c).ix < 2 ? 1 : 2;
  const DistrictMap map(d, assign, t);
  const std::vector<double> keep{0.3, 0.8};
  GroundTruth truth(g, map, t, keep);
  for (double day : {1.0, 2.0, 5.0, 11.0, 19.0}) {
    const auto& rates = truth.at(day, s.events);
    for (std::size_t c = 0; c < d.cell_count(); ++c) {
      const double p = keep[t.position_of(assign[c])];
      CHECK(rates[c] == doctest::Approx(true_expected_cell_count(g, s.events, d.cell(c), day, p))
                            .epsilon(1e-10));
    }
  }
}

TEST_CASE("simulated dataset invariants") {
  ExperimentConfig config;
  const StudySetup setup = smoke_setup(config);
  const CrimeDataset a = simulate(config.sim, setup.map, setup.districts, setup.total_rate, 5);
  const CrimeDataset b = simulate(config.sim, setup.map, setup.districts, setup.total_rate, 5);
  const CrimeDataset c = simulate(config.sim, setup.map, setup.districts, setup.total_rate, 6);

  CHECK(a.candidates == b.candidates);
  CHECK(a.true_index == b.true_index);
  CHECK(a.reported_index == b.reported_index);
  CHECK_FALSE(a.candidates == c.candidates);

  const SpatialDomain d = config.sim.domain();
  REQUIRE(a.district.size() == a.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    const Event& e = a.candidates[i];
    CHECK(d.contains(e.x, e.y));
    CHECK(e.t < config.sim.horizon);
    CHECK(a.district[i] == setup.map.district_of_point(e.x, e.y));
  }
  CHECK(std::is_sorted(a.true_index.begin(), a.true_index.end()));
  CHECK(std::includes(a.true_index.begin(), a.true_index.end(), a.reported_index.begin(),
                      a.reported_index.end()));
  CHECK(a.true_index.back() < a.candidates.size());
  for (double p : a.keep_prob) CHECK(p <= config.sim.generator.max_keep_prob + 1e-12);

  const FullEvents full = a.true_events();
  const ReportedEvents rep = a.reported_events();
  CHECK(full.size() == a.true_index.size());
  CHECK(rep.size() == a.reported_index.size());
  const FullEvents window = full.between(100, 300);
  for (const Event& e : window.events()) {
    CHECK(e.t >= 100);
    CHECK(e.t < 300);
  }
  static_assert(std::is_same_v<decltype(window), const FullEvents>);
  static_assert(!std::is_convertible_v<FullEvents, ReportedEvents>);
}

TEST_CASE("sanity summary") {
  ExperimentConfig config;
  const StudySetup setup = smoke_setup(config);
  const CrimeDataset empty;
  const auto rows0 = sanity_summary(empty, config.sim, setup.map, setup.districts);
  REQUIRE(rows0.size() == 3);
  for (const auto& r : rows0) {
    CHECK(r.simulated == 0.0);
    CHECK(r.survey == doctest::Approx(config.sim.survey_daily_count(setup.districts.by_id(r.district))));
  }

  std::vector<double> sim(3, 0), integral(3, 0);
  const int reps = 8;
  for (int k = 0; k < reps; ++k) {
    const auto ds = simulate(config.sim, setup.map, setup.districts, setup.total_rate, 40 + k);
    const auto rows = sanity_summary(ds, config.sim, setup.map, setup.districts);
    for (std::size_t j = 0; j < 3; ++j) {
      sim[j] += rows[j].simulated / reps;
      integral[j] += rows[j].integral / reps;
    }
  }
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(sim[j] == doctest::Approx(rows0[j].survey).epsilon(0.05));
    CHECK(integral[j] == doctest::Approx(sim[j]).epsilon(0.05));
  }
}

TEST_CASE("true counts follow the thinned intensity") {
  ExperimentConfig config;
  const StudySetup setup = smoke_setup(config);
  const SpatialDomain d = config.sim.domain();
  const IntensityModel g = make_generator(config.sim, setup.total_rate);
  const int days = static_cast<int>(config.sim.horizon);
  std::vector<double> observed(d.cell_count(), 0), expected(d.cell_count(), 0);
  for (int k = 0; k < 4; ++k) {
    const auto ds = simulate(config.sim, setup.map, setup.districts, setup.total_rate, 90 + k);
    for (std::uint32_t i : ds.true_index) {
      observed[d.cell_of(ds.candidates[i].x, ds.candidates[i].y)] += 1;
    }
    GroundTruth truth(g, setup.map, setup.districts, ds.keep_prob);
    for (int day = 0; day < days; ++day) {
      const auto& rates = truth.at(day, ds.candidates);
      for (std::size_t c = 0; c < rates.size(); ++c) expected[c] += rates[c];
    }
  }
  double chi2 = 0;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    chi2 += (observed[c] - expected[c]) * (observed[c] - expected[c]) / expected[c];
  }
  const boost::math::chi_squared dist(static_cast<double>(d.cell_count()));
  CHECK(chi2 < boost::math::quantile(dist, 0.99));
}
