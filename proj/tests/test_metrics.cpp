#include <doctest.h>

#include <cmath>
#include <random>

#include "hotspot/metrics.hpp"

using namespace hotspot;

namespace {

// A 4x3 grid split into district 1 (left 2 columns, 6 cells), district 2
// (third column, 3 cells) and district 3 (last column, 3 cells).
struct Fixture {
  SpatialDomain domain = SpatialDomain::centered(4, 3, 1, 10);
  DistrictTable table{{{1, "one", 10, 0.1, 0.1}, {2, "two", 10, 0.1, 0.3},
                       {3, "three", 10, 0.1, 0.2}}};
  DistrictMap map;

  Fixture() {
    std::vector<int> a(12);
    for (std::size_t c = 0; c < 12; ++c) {
      const int ix = domain.cell(c).ix;
      a[c] = ix < 2 ? 1 : ix == 2 ? 2 : 3;
    }
    map = DistrictMap(domain, a, table);
  }

  std::size_t cell(int ix, int iy) const { return domain.cell_index(ix, iy); }
};

HotspotSet set_of(std::vector<std::size_t> cells) {
  std::sort(cells.begin(), cells.end());
  return HotspotSet{0, cells};
}

MetricRecord record(int district, const std::string& model, int t, int p,
                    MetricValue threshold = {0.0, Sentinel::omitted}) {
  MetricRecord r;
  r.district = district;
  r.model = model;
  r.true_hotspots = t;
  r.predicted_hotspots = p;
  if (t == 0) {
    r.relative_count = p == 0 ? MetricValue{1, Sentinel::none} : MetricValue{0, Sentinel::excluded};
  } else {
    r.relative_count = {static_cast<double>(p) / t, Sentinel::none};
  }
  r.min_true_threshold = threshold;
  return r;
}

}  // namespace

TEST_CASE("relative count conventions") {
  Fixture f;
  const auto t4 = set_of({f.cell(0, 0), f.cell(1, 0), f.cell(0, 1), f.cell(1, 2)});
  const auto p2 = set_of({f.cell(0, 0), f.cell(1, 1), f.cell(2, 0), f.cell(2, 1), f.cell(2, 2)});
  const auto r1 = relative_count(1, t4, p2, f.map);
  CHECK(r1.present());
  CHECK(r1.value == doctest::Approx(0.5));

  const auto r3 = relative_count(3, t4, p2, f.map);
  CHECK(r3.present());
  CHECK(r3.value == 1.0);

  const auto r2 = relative_count(2, t4, p2, f.map);
  CHECK(r2.flag == Sentinel::excluded);
  CHECK(sentinel_name(r2.flag) == "excluded");
  CHECK(sentinel_name(Sentinel::omitted) == "omitted");
  CHECK(sentinel_name(Sentinel::none).empty());
}

TEST_CASE("threshold and share") {
  Fixture f;
  std::vector<double> rates(12, 0.0);
  rates[f.cell(2, 0)] = 0.7;
  rates[f.cell(2, 1)] = 0.3;
  rates[f.cell(2, 2)] = 0.5;
  const auto only_high = set_of({f.cell(2, 0), f.cell(0, 0)});
  const auto thr = min_true_threshold(2, only_high, rates, f.map);
  CHECK(thr.present());
  CHECK(thr.value == 0.7);

  CHECK(min_true_threshold(3, only_high, rates, f.map).flag == Sentinel::omitted);
  const auto all_two = set_of({f.cell(2, 0), f.cell(2, 1), f.cell(2, 2)});
  CHECK(min_true_threshold(2, all_two, rates, f.map).value == 0.3);
  CHECK_THROWS(min_true_threshold(2, all_two, std::vector<double>(3, 1.0), f.map));

  CHECK(district_hotspot_share(3, only_high, f.map) == 0.0);
  CHECK(district_hotspot_share(2, all_two, f.map) == 1.0);
  CHECK(district_hotspot_share(1, only_high, f.map) == doctest::Approx(1.0 / 6));

  // 3 of 12 cells.
  const SpatialDomain big = SpatialDomain::centered(12, 1, 1, 10);
  const DistrictTable one({{5, "all", 10, 0.1, 0.1}});
  const DistrictMap whole(big, std::vector<int>(12, 5), one);
  CHECK(district_hotspot_share(5, set_of({0, 4, 9}), whole) == doctest::Approx(0.25));
}

TEST_CASE("day records") {
  Fixture f;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    CellPredictions truth{0, std::vector<double>(12)}, pred{0, std::vector<double>(12)};
    for (std::size_t c = 0; c < 12; ++c) {
      truth.values[c] = u(rng);
      pred.values[c] = u(rng);
    }
    const auto th = select_hotspots(truth, 4);
    const auto ph = select_hotspots(pred, 4);
    const auto recs = day_records(2, 7, "S2", th, ph, truth.values, f.map, f.table);
    REQUIRE(recs.size() == 3);
    int total_pred = 0, total_true = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const MetricRecord& r = recs[k];
      CHECK(r.run == 2);
      CHECK(r.day == 7);
      CHECK(r.model == "S2");
      CHECK(r.district == f.table.at(k).id);
      total_pred += r.predicted_hotspots;
      total_true += r.true_hotspots;
      const auto rc = relative_count(r.district, th, ph, f.map);
      CHECK(rc.flag == r.relative_count.flag);
      if (rc.present()) CHECK(rc.value == r.relative_count.value);
      const auto mt = min_true_threshold(r.district, ph, truth.values, f.map);
      CHECK(mt.flag == r.min_true_threshold.flag);
      if (mt.present()) CHECK(mt.value == r.min_true_threshold.value);
      CHECK(r.share == district_hotspot_share(r.district, ph, f.map));
    }
    CHECK(total_pred == 4);
    CHECK(total_true == 4);
  }
}

TEST_CASE("summaries") {
  const std::vector<double> v{4, 1, 3, 2};
  const Summary s = summarize_values(v);
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.q1 == doctest::Approx(1.75));
  CHECK(s.q3 == doctest::Approx(3.25));
  const Summary e = summarize_values({});
  CHECK(e.count == 0);
  CHECK(std::isnan(e.mean));

  // Compensated mean is independent of order.
  std::vector<double> big{1e16, 1.0, -1e16, 1.0};
  CHECK(mean(big) == 0.5);
  std::reverse(big.begin(), big.end());
  CHECK(mean(big) == 0.5);

  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 40}) == doctest::Approx(1));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1));
  // Average ranks for ties: x ranks (1, 2.5, 2.5, 4), y ranks (1, 2, 3, 4).
  const double rho = spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 4});
  CHECK(rho == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
  CHECK(std::isnan(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3})));
  CHECK_THROWS(spearman(std::vector<double>{1, 2}, std::vector<double>{1}));
}

TEST_CASE("aggregations") {
  std::vector<MetricRecord> recs;
  // District 1: predicted = true + 2 always; district 2: zero-true half the time.
  for (int k = 0; k < 4; ++k) recs.push_back(record(1, "S1", 3, 5, {0.4 + 0.1 * k, Sentinel::none}));
  recs.push_back(record(2, "S1", 0, 0));
  recs.push_back(record(2, "S1", 0, 2, {0.2, Sentinel::none}));
  recs.push_back(record(2, "S1", 2, 1, {0.3, Sentinel::none}));
  recs.push_back(record(2, "S1", 4, 4, {0.5, Sentinel::none}));
  recs.push_back(record(1, "M2", 1, 1, {0.9, Sentinel::none}));

  const auto nt = no_true_fractions(recs);
  REQUIRE(nt.size() == 3);
  CHECK(nt[0].district == 1);
  CHECK(nt[0].model == "S1");
  CHECK(nt[0].zero_true == 0.0);
  CHECK(nt[0].zero_true_predicted == 0.0);
  CHECK(nt[0].zero_true_not_predicted == 0.0);
  CHECK(nt[1].district == 2);
  CHECK(nt[1].zero_true == 0.5);
  CHECK(nt[1].zero_true_predicted == 0.25);
  CHECK(nt[1].zero_true_not_predicted == 0.25);
  CHECK(nt[2].model == "M2");

  const auto over = overprediction(recs);
  CHECK(over[0].summary.mean == 2.0);
  CHECK(over[1].summary.mean == doctest::Approx(0.25));

  const auto rc = relative_count_summary(recs);
  CHECK(rc[1].steps == 4);
  CHECK(rc[1].summary.count == 3);  // the excluded step is dropped
  CHECK(rc[1].summary.mean == doctest::Approx((1 + 0.5 + 1) / 3));

  const auto th = threshold_summary(recs);
  CHECK(th[0].summary.mean == doctest::Approx(0.55));
  CHECK(th[1].summary.count == 3);
  CHECK(is_regular(th[0]));
  CHECK(is_regular(th[1]));
  std::vector<MetricRecord> sparse{record(3, "S2", 1, 0), record(3, "S2", 1, 0),
                                   record(3, "S2", 1, 1, {0.2, Sentinel::none})};
  CHECK_FALSE(is_regular(threshold_summary(sparse)[0]));

  std::vector<MetricRecord> same{record(1, "S1", 3, 3), record(1, "S1", 0, 0)};
  CHECK(overprediction(same)[0].summary.mean == 0.0);
  std::vector<MetricRecord> under{record(1, "S1", 3, 1)};
  CHECK(overprediction(under)[0].summary.mean == -2.0);

  CHECK(model_rank("S1") == 0);
  CHECK(model_rank("M3") == 5);
  CHECK(model_rank("X") == 6);
}

TEST_CASE("heat tables") {
  const std::vector<double> t{0.5, 2.0, 1.0}, p{3.0, 1.5, 0.0};
  const HeatTables h = heat_table(t, p);
  CHECK(h.true_rates == std::vector<double>{0.25, 1.0, 0.5});
  CHECK(h.predicted == std::vector<double>{1.0, 0.5, 0.0});
  CHECK_THROWS(heat_table(std::vector<double>{0, 0}, p));
  CHECK_THROWS(heat_table(t, std::vector<double>{0, 0}));
}
