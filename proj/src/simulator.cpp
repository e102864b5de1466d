#include "hotspot/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace hotspot {

namespace {

constexpr double kHalfYearDays = 365.0 / 2.0;

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Candidate indices grouped by district table position.
std::vector<std::vector<std::uint32_t>> group_by_district(
    std::span<const std::uint32_t> index, std::span<const int> district_of_event,
    const DistrictTable& districts) {
  std::vector<std::vector<std::uint32_t>> groups(districts.size());
  std::vector<int> ids;
  for (const auto& r : districts.rows()) ids.push_back(r.id);
  const int max_id = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end());
  std::vector<int> position(static_cast<std::size_t>(std::max(max_id, 0)) + 1, -1);
  for (std::size_t d = 0; d < ids.size(); ++d) {
    if (ids[d] >= 0) position[static_cast<std::size_t>(ids[d])] = static_cast<int>(d);
  }
  for (std::uint32_t i : index) {
    const int id = district_of_event[i];
    if (id < 0 || id > max_id || position[static_cast<std::size_t>(id)] < 0) {
      throw std::out_of_range("event in unknown district " + std::to_string(id));
    }
    groups[static_cast<std::size_t>(position[static_cast<std::size_t>(id)])].push_back(i);
  }
  return groups;
}

// Binomial(|group|, p) draw, then a uniform subset of that size.
void binomial_subsample(const std::vector<std::uint32_t>& group, double p,
                        Rng& rng, std::vector<std::uint32_t>& out) {
  if (group.empty() || p <= 0.0) return;
  std::size_t n = group.size();
  if (p < 1.0) {
    std::binomial_distribution<std::size_t> draw(group.size(), p);
    n = draw(rng);
  }
  std::sample(group.begin(), group.end(), std::back_inserter(out), n, rng);
}

}  // namespace

void SimConfig::validate() const {
  domain();  // validates extent and cell size
  if (!(burn_in >= 0.0) || !(train_len > 0.0) || !(eval_len > 0.0)) {
    throw std::invalid_argument("SimConfig: window lengths must be positive");
  }
  if (burn_in + train_len + eval_len > horizon) {
    throw std::invalid_argument(
        "SimConfig: burn_in + train_len + eval_len exceeds the horizon");
  }
  if (!(population_scale > 0.0)) {
    throw std::invalid_argument("SimConfig: population_scale must be positive");
  }
  if (std::abs(time_factor - horizon / kHalfYearDays) > 1e-9 * time_factor) {
    throw std::invalid_argument(
        "SimConfig: time_factor must equal horizon / (365/2)");
  }
  const auto& g = generator;
  if (g.centers < 1 || !(g.bandwidth > 0.0) || !(g.omega > 0.0) ||
      !(g.sigma_x > 0.0) || !(g.sigma_y > 0.0) || !(g.offspring_mean >= 0.0) ||
      !(g.total_rate >= 0.0) || !(g.center_jitter >= 0.0) ||
      !(g.max_keep_prob > 0.0 && g.max_keep_prob <= 1.0)) {
    throw std::invalid_argument("SimConfig: invalid generator settings");
  }
  if (g.offspring_mean >= 1.0) {
    throw std::invalid_argument(
        "SimConfig: generator offspring mean must be below one");
  }
}

SpatialDomain SimConfig::domain() const {
  return SpatialDomain::centered(width, height, cell_size, horizon);
}

double SimConfig::target_count(const DistrictRecord& district) const {
  return district.population * population_scale *
         district.victimization_rate * time_factor;
}

double SimConfig::survey_daily_count(const DistrictRecord& district) const {
  return district.population * population_scale *
         district.victimization_rate / kHalfYearDays;
}

std::vector<MixtureBackground::Center> mixture_layout(const SimConfig& config) {
  const auto& g = config.generator;
  Rng rng = make_rng(stage_seed(g.layout_seed, "mixture-centres"));
  std::uniform_real_distribution<double> jitter(-g.center_jitter,
                                                g.center_jitter);
  std::vector<MixtureBackground::Center> centers;
  const double margin = 0.1;
  for (int j = 1; j <= g.centers; ++j) {
    const double u = halton(static_cast<std::uint64_t>(j), 2);
    const double v = halton(static_cast<std::uint64_t>(j), 3);
    MixtureBackground::Center c;
    c.x = -config.width / 2 + config.width * (margin + (1 - 2 * margin) * u);
    c.y = -config.height / 2 + config.height * (margin + (1 - 2 * margin) * v);
    c.x += jitter(rng);
    c.y += jitter(rng);
    centers.push_back(c);
  }
  return centers;
}

IntensityModel make_generator(const SimConfig& config, double total_rate) {
  const auto& g = config.generator;
  return IntensityModel::generator(
      MixtureBackground::equal_weights(mixture_layout(config), g.bandwidth,
                                       total_rate),
      g.offspring_mean, g.omega, g.sigma_x, g.sigma_y);
}

CandidateSample sample_candidates(const IntensityModel& generator,
                                  const SpatialDomain& domain, double horizon,
                                  Rng& rng) {
  const double m = generator.offspring_mean();
  if (!(m < 1.0)) {
    throw std::invalid_argument(
        "sample_candidates: offspring mean must be below one");
  }
  const auto* mixture = std::get_if<MixtureBackground>(&generator.background);
  const auto* gaussian = std::get_if<GaussianBackground>(&generator.background);

  std::vector<Event> events;
  std::vector<std::uint32_t> parent;  // 0 or 1 + generation-order index

  // Background: Poisson count over the plane, then location by component.
  const double rate = mixture ? mixture->total_rate : gaussian->mu_bar;
  std::poisson_distribution<long long> count_draw(rate * horizon);
  const long long n_background = count_draw(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<std::size_t> component;
  if (mixture) {
    component = std::discrete_distribution<std::size_t>(
        mixture->weights.begin(), mixture->weights.end());
  }
  for (long long k = 0; k < n_background; ++k) {
    double x, y;
    if (mixture) {
      const auto& c = mixture->centers[component(rng)];
      x = c.x + mixture->bandwidth * normal(rng);
      y = c.y + mixture->bandwidth * normal(rng);
    } else {
      x = gaussian->deviation * normal(rng);
      y = gaussian->deviation * normal(rng);
    }
    const double t = horizon * unit(rng);
    if (domain.contains(x, y) && t < horizon) {
      events.push_back({x, y, t});
      parent.push_back(0);
    }
  }

  // Offspring cascade, generation by generation in creation order.
  if (m > 0.0) {
    std::poisson_distribution<int> offspring_draw(m);
    std::exponential_distribution<double> delay(generator.omega);
    for (std::size_t i = 0; i < events.size(); ++i) {
      const int children = offspring_draw(rng);
      for (int c = 0; c < children; ++c) {
        const Event& p = events[i];
        const Event child{p.x + generator.sigma_x * normal(rng),
                          p.y + generator.sigma_y * normal(rng),
                          p.t + delay(rng)};
        if (domain.contains(child.x, child.y) && child.t < horizon) {
          events.push_back(child);
          parent.push_back(static_cast<std::uint32_t>(i + 1));
        }
      }
    }
  }

  // Sort by time and remap parent links.
  std::vector<std::uint32_t> order(events.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return events[a].t < events[b].t;
  });
  std::vector<std::uint32_t> rank(events.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  CandidateSample out;
  out.events.reserve(events.size());
  out.branching.parent.reserve(events.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) {
    out.events.push_back(events[order[r]]);
    const std::uint32_t p = parent[order[r]];
    out.branching.parent.push_back(p == 0 ? 0 : rank[p - 1] + 1);
  }
  return out;
}

double victimization_keep_prob(const DistrictRecord& district,
                               std::size_t candidate_count,
                               const SimConfig& config) {
  if (candidate_count == 0) {
    throw GeneratorRateTooLow("district " + district.name +
                              " has no candidate events; raise total_rate");
  }
  const double p =
      config.target_count(district) / static_cast<double>(candidate_count);
  if (p > 1.0) {
    throw GeneratorRateTooLow(
        "district " + district.name + " needs keep probability " +
        std::to_string(p) + " > 1; raise the generator total_rate");
  }
  return p;
}

FullEvents CrimeDataset::true_events() const {
  return FullEvents(select(true_index));
}

ReportedEvents CrimeDataset::reported_events() const {
  return ReportedEvents(select(reported_index));
}

std::vector<Event> CrimeDataset::select(
    std::span<const std::uint32_t> index) const {
  std::vector<Event> out;
  out.reserve(index.size());
  for (std::uint32_t i : index) out.push_back(candidates.at(i));
  return out;
}

std::vector<std::uint32_t> thin_true(std::span<const Event> candidates,
                                     std::span<const int> district_of_event,
                                     const DistrictTable& districts,
                                     const SimConfig& config, Rng& rng,
                                     std::vector<double>* keep_prob) {
  if (district_of_event.size() != candidates.size()) {
    throw std::invalid_argument("thin_true: one district per candidate");
  }
  std::vector<std::uint32_t> all(candidates.size());
  std::iota(all.begin(), all.end(), 0u);
  const auto groups = group_by_district(all, district_of_event, districts);

  std::vector<double> probs(districts.size());
  for (std::size_t d = 0; d < districts.size(); ++d) {
    probs[d] = victimization_keep_prob(districts.at(d), groups[d].size(), config);
  }
  std::vector<std::uint32_t> kept;
  for (std::size_t d = 0; d < districts.size(); ++d) {
    binomial_subsample(groups[d], probs[d], rng, kept);
  }
  std::sort(kept.begin(), kept.end());
  if (keep_prob) *keep_prob = std::move(probs);
  return kept;
}

std::vector<std::uint32_t> thin_reported(
    std::span<const std::uint32_t> true_index,
    std::span<const int> district_of_event, const DistrictTable& districts,
    Rng& rng) {
  const auto groups = group_by_district(true_index, district_of_event, districts);
  std::vector<std::uint32_t> kept;
  for (std::size_t d = 0; d < districts.size(); ++d) {
    binomial_subsample(groups[d], districts.at(d).reporting_rate, rng, kept);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

double true_expected_cell_count(const IntensityModel& generator,
                                std::span<const Event> candidate_history,
                                const GridCell& cell, double t,
                                double keep_prob) {
  if (keep_prob == 0.0) return 0.0;
  return keep_prob * cell_integral(generator, candidate_history, cell, t);
}

GroundTruth::GroundTruth(const IntensityModel& generator, const DistrictMap& map,
                         const DistrictTable& districts,
                         std::span<const double> keep_prob)
    : field_(map.domain(), generator.omega, generator.sigma_x,
             generator.sigma_y) {
  if (keep_prob.size() != districts.size()) {
    throw std::invalid_argument("GroundTruth: one keep probability per district");
  }
  const SpatialDomain& domain = map.domain();
  const std::size_t cells = domain.cell_count();
  background_.resize(cells);
  scale_.resize(cells);
  rates_.resize(cells);
  const double m_omega = generator.offspring_mean() * generator.omega;
  for (std::size_t c = 0; c < cells; ++c) {
    const double p = keep_prob[districts.position_of(map.district_of_cell(c))];
    background_[c] = p * background_mass(generator.background, domain.cell(c));
    scale_[c] = p * m_omega;
  }
}

const std::vector<double>& GroundTruth::at(double t,
                                           std::span<const Event> candidates) {
  std::size_t end = cursor_;
  while (end < candidates.size() && candidates[end].t < t) ++end;
  field_.advance(t, candidates.subspan(cursor_, end - cursor_));
  cursor_ = end;
  const auto& f = field_.values();
  for (std::size_t c = 0; c < rates_.size(); ++c) {
    rates_[c] = background_[c] + scale_[c] * f[c];
  }
  return rates_;
}

CrimeDataset simulate(const SimConfig& config, const DistrictMap& map,
                      const DistrictTable& districts, double total_rate,
                      std::uint64_t seed) {
  config.validate();
  if (!(total_rate > 0.0)) {
    throw std::invalid_argument("simulate: total_rate must be positive");
  }
  const SpatialDomain domain = config.domain();
  const IntensityModel generator = make_generator(config, total_rate);

  Rng candidate_rng = make_rng(stage_seed(seed, kStageCandidates));
  CandidateSample sample =
      sample_candidates(generator, domain, config.horizon, candidate_rng);

  CrimeDataset data;
  data.total_rate = total_rate;
  data.candidates = std::move(sample.events);
  data.branching = std::move(sample.branching);
  data.district.reserve(data.candidates.size());
  for (const Event& e : data.candidates) {
    data.district.push_back(map.district_of_point(e.x, e.y));
  }

  Rng true_rng = make_rng(stage_seed(seed, kStageTrue));
  data.true_index = thin_true(data.candidates, data.district, districts, config,
                              true_rng, &data.keep_prob);
  Rng reported_rng = make_rng(stage_seed(seed, kStageReported));
  data.reported_index =
      thin_reported(data.true_index, data.district, districts, reported_rng);
  return data;
}

double calibrate_total_rate(const SimConfig& config, const DistrictMap& map,
                            const DistrictTable& districts) {
  config.validate();
  if (config.generator.total_rate > 0.0) return config.generator.total_rate;

  // Expected candidates in d ~ rate * horizon * mass_d / (1 - m), ignoring
  // offspring lost at the edges; aim a little under the ceiling.
  const IntensityModel unit = make_generator(config, 1.0);
  const SpatialDomain domain = config.domain();
  const double m = config.generator.offspring_mean;
  const double ceiling = config.generator.max_keep_prob;
  double rate = 0.0;
  for (std::size_t d = 0; d < districts.size(); ++d) {
    double mass = 0.0;
    for (std::size_t c : map.cells_of(districts.at(d).id)) {
      mass += background_mass(unit.background, domain.cell(c));
    }
    const double needed = config.target_count(districts.at(d)) * (1.0 - m) /
                          (0.95 * ceiling * config.horizon * mass);
    rate = std::max(rate, needed);
  }

  const std::uint64_t pilot_seed = stage_seed(config.seed, "calibration-pilot");
  for (int attempt = 0; attempt < 40; ++attempt) {
    const IntensityModel generator = make_generator(config, rate);
    Rng rng = make_rng(pilot_seed);
    const CandidateSample pilot =
        sample_candidates(generator, domain, config.horizon, rng);
    std::vector<std::size_t> counts(districts.size(), 0);
    for (const Event& e : pilot.events) {
      ++counts[districts.position_of(map.district_of_point(e.x, e.y))];
    }
    double max_p = 0.0;
    for (std::size_t d = 0; d < districts.size(); ++d) {
      max_p = counts[d] == 0
                  ? INFINITY
                  : std::max(max_p, config.target_count(districts.at(d)) /
                                        static_cast<double>(counts[d]));
    }
    if (max_p <= ceiling) return rate;
    rate *= 1.5;
  }
  throw GeneratorRateTooLow("calibrate_total_rate: no feasible rate found");
}

std::vector<SanityRow> sanity_summary(const CrimeDataset& dataset,
                                      const SimConfig& config,
                                      const DistrictMap& map,
                                      const DistrictTable& districts) {
  std::vector<SanityRow> rows(districts.size());
  for (std::size_t d = 0; d < districts.size(); ++d) {
    rows[d].district = districts.at(d).id;
    rows[d].name = districts.at(d).name;
    rows[d].survey = config.survey_daily_count(districts.at(d));
  }
  for (std::uint32_t i : dataset.true_index) {
    rows[districts.position_of(dataset.district[i])].simulated += 1.0;
  }
  for (auto& r : rows) r.simulated /= config.horizon;

  if (dataset.candidates.empty() || dataset.total_rate <= 0.0 ||
      dataset.keep_prob.size() != districts.size()) {
    return rows;
  }
  const IntensityModel generator = make_generator(config, dataset.total_rate);
  GroundTruth truth(generator, map, districts, dataset.keep_prob);
  std::vector<std::size_t> position(map.cell_count());
  for (std::size_t c = 0; c < map.cell_count(); ++c) {
    position[c] = districts.position_of(map.district_of_cell(c));
  }
  const int days = static_cast<int>(std::floor(config.horizon));
  for (int day = 0; day < days; ++day) {
    const auto& rates = truth.at(static_cast<double>(day), dataset.candidates);
    for (std::size_t c = 0; c < rates.size(); ++c) {
      rows[position[c]].integral += rates[c];
    }
  }
  for (auto& r : rows) r.integral /= static_cast<double>(days);
  return rows;
}

}  // namespace hotspot
