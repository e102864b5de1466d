#include "hotspot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hotspot/csv.hpp"
#include "hotspot/rng.hpp"

namespace hotspot {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---- configuration -------------------------------------------------------

[[noreturn]] void config_error(const std::string& what) { throw ConfigError(what); }

template <class T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    config_error("config: wrong type for '" + key + "'");
  }
}

void require_object(const json& value, const std::string& key) {
  if (!value.is_object()) config_error("config: '" + key + "' must be an object");
}

void apply_simulation(const json& obj, SimConfig& sim) {
  require_object(obj, "simulation");
  for (const auto& [key, value] : obj.items()) {
    const std::string k = "simulation." + key;
    if (key == "width") sim.width = get_as<double>(value, k);
    else if (key == "height") sim.height = get_as<double>(value, k);
    else if (key == "cell_size") sim.cell_size = get_as<double>(value, k);
    else if (key == "horizon") sim.horizon = get_as<double>(value, k);
    else if (key == "burn_in") sim.burn_in = get_as<double>(value, k);
    else if (key == "train_len") sim.train_len = get_as<double>(value, k);
    else if (key == "eval_len") sim.eval_len = get_as<double>(value, k);
    else if (key == "population_scale") sim.population_scale = get_as<double>(value, k);
    else if (key == "time_factor") sim.time_factor = get_as<double>(value, k);
    else if (key == "background_deviation") sim.background_deviation = get_as<double>(value, k);
    else if (key == "seed") sim.seed = get_as<std::uint64_t>(value, k);
    else config_error("config: unknown key '" + k + "'");
  }
}

void apply_generator(const json& obj, GeneratorConfig& g) {
  require_object(obj, "generator");
  for (const auto& [key, value] : obj.items()) {
    const std::string k = "generator." + key;
    if (key == "centers") g.centers = get_as<int>(value, k);
    else if (key == "bandwidth") g.bandwidth = get_as<double>(value, k);
    else if (key == "center_jitter") g.center_jitter = get_as<double>(value, k);
    else if (key == "total_rate") g.total_rate = get_as<double>(value, k);
    else if (key == "offspring_mean") g.offspring_mean = get_as<double>(value, k);
    else if (key == "omega") g.omega = get_as<double>(value, k);
    else if (key == "sigma_x") g.sigma_x = get_as<double>(value, k);
    else if (key == "sigma_y") g.sigma_y = get_as<double>(value, k);
    else if (key == "max_keep_prob") g.max_keep_prob = get_as<double>(value, k);
    else if (key == "layout_seed") g.layout_seed = get_as<std::uint64_t>(value, k);
    else config_error("config: unknown key '" + k + "'");
  }
}

void apply_em(const json& obj, EmOptions& em) {
  require_object(obj, "em");
  for (const auto& [key, value] : obj.items()) {
    const std::string k = "em." + key;
    if (key == "tol") em.tol = get_as<double>(value, k);
    else if (key == "max_iter") em.max_iter = get_as<int>(value, k);
    else if (key == "edge_correction") em.edge_correction = get_as<bool>(value, k);
    else if (key == "prune_ratio") em.prune_ratio = get_as<double>(value, k);
    else if (key == "accelerate") em.accelerate = get_as<bool>(value, k);
    else config_error("config: unknown key '" + k + "'");
  }
}

std::vector<double> parse_beta_grid(const json& value) {
  if (value.is_array()) return get_as<std::vector<double>>(value, "beta_grid");
  require_object(value, "beta_grid");
  double lo = 0.02, hi = 2.0;
  int count = 25;
  for (const auto& [key, v] : value.items()) {
    if (key == "min") lo = get_as<double>(v, "beta_grid.min");
    else if (key == "max") hi = get_as<double>(v, "beta_grid.max");
    else if (key == "count") count = get_as<int>(v, "beta_grid.count");
    else config_error("config: unknown key 'beta_grid." + key + "'");
  }
  if (count < 1) config_error("config: beta_grid.count must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    out[k] = count == 1 ? lo : lo + (hi - lo) * k / (count - 1);
  }
  return out;
}

void apply_output(const json& obj, ExperimentConfig& c) {
  require_object(obj, "output");
  for (const auto& [key, value] : obj.items()) {
    const std::string k = "output." + key;
    if (key == "directory") c.output_dir = get_as<std::string>(value, k);
    else if (key == "dump_predictions") c.dump_predictions = get_as<bool>(value, k);
    else if (key == "dump_datasets") c.dump_datasets = get_as<bool>(value, k);
    else if (key == "dump_fits") c.dump_fits = get_as<bool>(value, k);
    else config_error("config: unknown key '" + k + "'");
  }
}

std::string resolve_path(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.string();
}

json to_json(const ExperimentConfig& c) {
  const SimConfig& s = c.sim;
  const GeneratorConfig& g = s.generator;
  json models = json::array();
  for (const auto& m : c.models) models.push_back(m.label());
  return json{
      {"simulation",
       {{"width", s.width}, {"height", s.height}, {"cell_size", s.cell_size},
        {"horizon", s.horizon}, {"burn_in", s.burn_in}, {"train_len", s.train_len},
        {"eval_len", s.eval_len}, {"population_scale", s.population_scale},
        {"time_factor", s.time_factor},
        {"background_deviation", s.background_deviation}, {"seed", s.seed}}},
      {"generator",
       {{"centers", g.centers}, {"bandwidth", g.bandwidth},
        {"center_jitter", g.center_jitter}, {"total_rate", g.total_rate},
        {"offspring_mean", g.offspring_mean}, {"omega", g.omega},
        {"sigma_x", g.sigma_x}, {"sigma_y", g.sigma_y},
        {"max_keep_prob", g.max_keep_prob}, {"layout_seed", g.layout_seed}}},
      {"districts", c.districts},
      {"district_map", c.district_map},
      {"hotspots", c.hotspots},
      {"runs", c.runs},
      {"models", models},
      {"beta_grid", c.beta_grid},
      {"em",
       {{"tol", c.em.tol}, {"max_iter", c.em.max_iter},
        {"edge_correction", c.em.edge_correction},
        {"prune_ratio", c.em.prune_ratio}, {"accelerate", c.em.accelerate}}},
      {"output",
       {{"directory", c.output_dir}, {"dump_predictions", c.dump_predictions},
        {"dump_datasets", c.dump_datasets}, {"dump_fits", c.dump_fits}}},
      {"jobs", c.jobs}};
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

// ---- outputs -------------------------------------------------------------

std::string num(double v) { return std::isnan(v) ? std::string() : csv::format(v); }

class TableWriter {
 public:
  TableWriter(const std::filesystem::path& dir, const std::string& name,
              std::string_view header, std::vector<std::string>& written)
      : out_(dir / name, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + (dir / name).string());
    out_ << header << '\n';
    written.push_back(name);
  }
  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fields, first = false), ...);
    out_ << '\n';
  }
  ~TableWriter() { out_.flush(); }

 private:
  std::ofstream out_;
};

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) out[static_cast<std::size_t>(k)] = digits[v & 15];
  return out;
}

}  // namespace

// ---- ExperimentConfig ----------------------------------------------------

EmOptions ExperimentConfig::default_em_options() {
  EmOptions em;
  em.tol = 1e-4;
  em.max_iter = 200;
  em.accelerate = true;
  return em;
}

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config: ") + e.what());
  }
  require_object(root, "<root>");
  ExperimentConfig c = defaults();
  for (const auto& [key, value] : root.items()) {
    if (key == "simulation") apply_simulation(value, c.sim);
    else if (key == "generator") apply_generator(value, c.sim.generator);
    else if (key == "em") apply_em(value, c.em);
    else if (key == "output") apply_output(value, c);
    else if (key == "beta_grid") c.beta_grid = parse_beta_grid(value);
    else if (key == "hotspots") c.hotspots = get_as<int>(value, key);
    else if (key == "runs") c.runs = get_as<int>(value, key);
    else if (key == "jobs") c.jobs = get_as<int>(value, key);
    else if (key == "models") {
      std::string list;
      if (value.is_string()) {
        list = value.get<std::string>();
      } else {
        for (const auto& m : get_as<std::vector<std::string>>(value, key)) list += m + ",";
      }
      try {
        c.models = parse_variants(list);
      } catch (const std::invalid_argument& e) {
        config_error(std::string("config: ") + e.what());
      }
    } else if (key == "districts") {
      const auto v = get_as<std::string>(value, key);
      c.districts = v.rfind("builtin:", 0) == 0 ? v : resolve_path(v, base_dir);
    } else if (key == "district_map") {
      const auto v = get_as<std::string>(value, key);
      c.district_map = v == "voronoi" ? v : resolve_path(v, base_dir);
    } else {
      config_error("config: unknown key '" + key + "'");
    }
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& name_or_path) {
  if (name_or_path == "default") return defaults();
  const std::filesystem::path path(name_or_path);
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("config: cannot read '" + name_or_path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str(), path.parent_path());
}

std::string ExperimentConfig::to_json_text() const { return to_json(*this).dump(2) + "\n"; }

void ExperimentConfig::validate() const {
  sim.validate();
  if (runs < 1) config_error("config: runs must be at least 1");
  if (hotspots < 1) config_error("config: hotspots must be at least 1");
  if (jobs < 1) config_error("config: jobs must be at least 1");
  if (models.empty()) config_error("config: no models selected");
  for (const auto& m : models) m.validate();
  if (beta_grid.empty()) config_error("config: empty beta grid");
  for (double b : beta_grid) {
    if (!(b > 0.0) || !std::isfinite(b)) config_error("config: beta values must be positive");
  }
  if (!is_integral(sim.burn_in) || !is_integral(sim.train_len) || !is_integral(sim.eval_len)) {
    config_error("config: burn_in, train_len and eval_len must be whole days");
  }
  if (sim.train_len < 2) config_error("config: train_len must be at least two days");
  if (!(em.tol > 0.0) || em.max_iter < 1 || !(em.prune_ratio >= 0.0 && em.prune_ratio < 1.0)) {
    config_error("config: invalid EM settings");
  }
}

int ExperimentConfig::eval_start() const {
  return static_cast<int>(sim.burn_in + sim.train_len);
}

int ExperimentConfig::eval_days() const { return static_cast<int>(sim.eval_len); }

// ---- runs ----------------------------------------------------------------

StudySetup prepare_setup(const ExperimentConfig& config) {
  config.validate();
  StudySetup setup;
  if (config.districts == "builtin:bogota") {
    setup.districts = DistrictTable::bogota();
  } else if (config.districts.rfind("builtin:", 0) == 0) {
    config_error("config: unknown built-in district table '" + config.districts + "'");
  } else {
    setup.districts = DistrictTable::read_csv(std::filesystem::path(config.districts));
  }
  const SpatialDomain domain = config.sim.domain();
  if (config.district_map == "voronoi") {
    setup.map = DistrictMap::voronoi(domain, setup.districts,
                                     config.sim.generator.layout_seed);
  } else {
    setup.map = DistrictMap::read_csv(std::filesystem::path(config.district_map),
                                      domain, setup.districts);
  }
  setup.total_rate = calibrate_total_rate(config.sim, setup.map, setup.districts);
  return setup;
}

RunResult run_single(const ExperimentConfig& config, const StudySetup& setup,
                     int run_index, const RunOptions& options) {
  RunResult r;
  r.run = run_index;
  r.seed = run_seed(config.sim.seed, static_cast<std::uint64_t>(run_index));
  std::string stage = "simulate";
  try {
    const SimConfig& sim = config.sim;
    const SpatialDomain domain = sim.domain();
    const DistrictMap& map = setup.map;
    const DistrictTable& districts = setup.districts;

    const CrimeDataset data = simulate(sim, map, districts, setup.total_rate, r.seed);
    r.candidate_count = data.candidates.size();
    r.true_count = data.true_index.size();
    r.reported_count = data.reported_index.size();
    if (options.sanity) r.sanity = sanity_summary(data, sim, map, districts);
    if (config.dump_datasets) {
      r.true_events = data.select(data.true_index);
      r.reported_flag.assign(r.true_events.size(), 0);
      std::size_t k = 0;
      for (std::size_t i = 0; i < data.true_index.size() && k < data.reported_index.size(); ++i) {
        if (data.true_index[i] == data.reported_index[k]) {
          r.reported_flag[i] = 1;
          ++k;
        }
      }
    }
    if (options.until == Stage::simulate) {
      r.ok = true;
      return r;
    }

    const FullEvents full = data.true_events();
    const ReportedEvents reported = data.reported_events();
    const double train_start = sim.burn_in;
    const int eval_start = config.eval_start();
    const int train_days = static_cast<int>(sim.train_len);
    const FullEvents train_full = full.between(train_start, eval_start);
    const ReportedEvents train_reported = reported.between(train_start, eval_start);

    bool sepp_full = false, sepp_rep = false, mavg_full = false, mavg_rep = false;
    for (const auto& m : config.models) {
      const bool is_full = m.data == DataSource::full;
      if (m.family == ModelFamily::sepp) (is_full ? sepp_full : sepp_rep) = true;
      else (is_full ? mavg_full : mavg_rep) = true;
    }

    const FitWindow window{train_start, static_cast<double>(eval_start)};
    EmOptions em = config.em;
    em.background_deviation = sim.background_deviation;
    auto fit_sepp = [&](std::span<const Event> events) {
      const SeppParams init =
          default_initial_params(events.size(), domain, window, sim.background_deviation);
      return fit(events, domain, window, init, em);
    };
    std::optional<SeppParams> params_full, params_rep;
    if (sepp_full) {
      stage = "fit S1";
      r.sepp_fits.push_back({"S1", fit_sepp(train_full.events())});
      params_full = r.sepp_fits.back().report.params;
    }
    if (sepp_rep) {
      stage = "fit S2";
      r.sepp_fits.push_back({"S2", fit_sepp(train_reported.events())});
      params_rep = r.sepp_fits.back().report.params;
    }
    std::vector<std::vector<double>> counts_full, counts_rep;
    if (mavg_full) {
      stage = "fit M1";
      counts_full = daily_cell_counts(train_full.events(), domain, train_start, train_days);
      r.bandwidths.push_back({"M1", mavg_fit_bandwidth(counts_full, config.beta_grid)});
    }
    if (mavg_rep) {
      stage = "fit M2";
      counts_rep = daily_cell_counts(train_reported.events(), domain, train_start, train_days);
      r.bandwidths.push_back({"M2", mavg_fit_bandwidth(counts_rep, config.beta_grid)});
    }
    auto beta_of = [&](const char* model) {
      for (const auto& b : r.bandwidths) {
        if (b.model == model) return b.beta;
      }
      throw std::logic_error("missing bandwidth");
    };
    if (options.until == Stage::fit) {
      r.ok = true;
      return r;
    }

    stage = "evaluate";
    std::optional<SeppPredictor<DataSource::full>> s_full;
    std::optional<SeppPredictor<DataSource::reported>> s_rep;
    std::optional<MavgPredictor<DataSource::full>> m_full;
    std::optional<MavgPredictor<DataSource::reported>> m_rep;
    if (params_full) {
      s_full.emplace(*params_full, domain, sim.background_deviation);
      s_full->observe(train_full);
    }
    if (params_rep) {
      s_rep.emplace(*params_rep, domain, sim.background_deviation);
      s_rep->observe(train_reported);
    }
    if (mavg_full) {
      m_full.emplace(beta_of("M1"), domain);
      for (const auto& day : counts_full) m_full->observe_counts(day);
    }
    if (mavg_rep) {
      m_rep.emplace(beta_of("M2"), domain);
      for (const auto& day : counts_rep) m_rep->observe_counts(day);
    }

    const std::size_t k = static_cast<std::size_t>(config.hotspots);
    const std::size_t cells = domain.cell_count();
    GroundTruth truth(make_generator(sim, data.total_rate), map, districts, data.keep_prob);
    r.heat_true.assign(cells, 0.0);
    for (const auto& m : config.models) r.heat_predicted[m.label()].assign(cells, 0.0);

    for (int d = 0; d < config.eval_days(); ++d) {
      const int day = eval_start + d;
      const double t = day;
      const CellPredictions truth_today{t, truth.at(t, data.candidates)};
      const HotspotSet true_hs = select_hotspots(truth_today, k);
      for (std::size_t c = 0; c < cells; ++c) r.heat_true[c] += truth_today.values[c];

      std::optional<CellPredictions> base_sf, base_sr, base_mf, base_mr;
      if (s_full) base_sf = s_full->predict(t);
      if (s_rep) base_sr = s_rep->predict(t);
      if (m_full) base_mf = m_full->predict(t);
      if (m_rep) base_mr = m_rep->predict(t);

      for (const auto& m : config.models) {
        const bool is_full = m.data == DataSource::full;
        const CellPredictions& base =
            m.family == ModelFamily::sepp ? (is_full ? *base_sf : *base_sr)
                                          : (is_full ? *base_mf : *base_mr);
        const CellPredictions pred = m.rescaled ? rescale(base, map, districts) : base;
        const HotspotSet hs = select_hotspots(pred, k);
        const std::string label = m.label();
        auto rows = day_records(r.run, day, label, true_hs, hs, truth_today.values, map, districts);
        r.records.insert(r.records.end(), std::make_move_iterator(rows.begin()),
                         std::make_move_iterator(rows.end()));
        auto& heat = r.heat_predicted[label];
        for (std::size_t c = 0; c < cells; ++c) heat[c] += pred.values[c];
        if (config.dump_predictions) {
          for (std::size_t c = 0; c < cells; ++c) {
            r.predictions.push_back({label, day, c, pred.values[c], hs.contains(c)});
          }
        }
      }

      // The day's events become history only after its predictions.
      if (s_full || m_full) {
        const FullEvents batch = full.between(t, t + 1.0);
        if (s_full) s_full->observe_day(t, batch);
        if (m_full) m_full->observe_day(t, batch);
      }
      if (s_rep || m_rep) {
        const ReportedEvents batch = reported.between(t, t + 1.0);
        if (s_rep) s_rep->observe_day(t, batch);
        if (m_rep) m_rep->observe_day(t, batch);
      }
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.failed_stage = stage;
    r.error = e.what();
    r.records.clear();
    r.predictions.clear();
  }
  return r;
}

std::size_t ExperimentResult::failed() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok; }));
}

std::vector<MetricRecord> ExperimentResult::records() const {
  std::vector<MetricRecord> out;
  for (const auto& r : runs) {
    if (r.ok) out.insert(out.end(), r.records.begin(), r.records.end());
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options,
                                const std::function<void(const std::string&)>& log) {
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(line);
  };

  ExperimentResult result;
  result.config = config;
  result.setup = prepare_setup(config);
  say("total background rate " + csv::format(result.setup.total_rate) + " events/day");
  result.runs.resize(static_cast<std::size_t>(config.runs));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < config.runs; i = next++) {
      say("run " + std::to_string(i) + ": started");
      RunResult r = run_single(config, result.setup, i, options);
      if (r.ok) {
        say("run " + std::to_string(i) + ": done (" + std::to_string(r.true_count) +
            " true, " + std::to_string(r.reported_count) + " reported events)");
      } else {
        say("run " + std::to_string(i) + ": FAILED at " + r.failed_stage + ": " + r.error);
      }
      result.runs[static_cast<std::size_t>(i)] = std::move(r);
    }
  };
  const int threads = std::min(config.jobs, config.runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (result.failed() > 0) {
    say(std::to_string(result.failed()) + " of " + std::to_string(config.runs) +
        " runs failed and are excluded from aggregation");
  }
  return result;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("HOTSPOT_SIM_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "out";
}

std::vector<SanityRow> average_sanity(const ExperimentResult& result) {
  std::vector<SanityRow> out;
  std::size_t n = 0;
  for (const auto& r : result.runs) {
    if (!r.ok || r.sanity.empty()) continue;
    if (out.empty()) {
      out = r.sanity;
      for (auto& row : out) row.simulated = row.integral = 0.0;
    }
    for (std::size_t d = 0; d < out.size(); ++d) {
      out[d].simulated += r.sanity[d].simulated;
      out[d].integral += r.sanity[d].integral;
    }
    ++n;
  }
  for (auto& row : out) {
    row.simulated /= static_cast<double>(n);
    row.integral /= static_cast<double>(n);
  }
  return out;
}

std::vector<std::string> write_outputs(const ExperimentResult& result,
                                       const std::filesystem::path& dir,
                                       const OutputOptions& options) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  const ExperimentConfig& config = result.config;
  const DistrictTable& districts = result.setup.districts;
  const DistrictMap& map = result.setup.map;
  const SpatialDomain& domain = map.domain();
  const std::vector<MetricRecord> records = result.records();
  std::size_t ok_runs = 0;
  for (const auto& r : result.runs) ok_runs += r.ok;

  if (options.metrics) {
    {
      TableWriter t(dir, "relative_counts.csv",
                    "run,day,district,model,true_hotspots,predicted_hotspots,value,sentinel",
                    written);
      for (const auto& r : records) {
        t.row(r.run, r.day, r.district, r.model, r.true_hotspots, r.predicted_hotspots,
              r.relative_count.present() ? csv::format(r.relative_count.value) : "",
              sentinel_name(r.relative_count.flag));
      }
    }
    {
      TableWriter t(dir, "thresholds.csv",
                    "run,day,district,model,predicted_hotspots,value,sentinel,share", written);
      for (const auto& r : records) {
        t.row(r.run, r.day, r.district, r.model, r.predicted_hotspots,
              r.min_true_threshold.present() ? csv::format(r.min_true_threshold.value) : "",
              sentinel_name(r.min_true_threshold.flag), csv::format(r.share));
      }
    }
    {
      TableWriter t(dir, "overprediction.csv",
                    "run,day,district,model,true_hotspots,predicted_hotspots,value", written);
      for (const auto& r : records) {
        t.row(r.run, r.day, r.district, r.model, r.true_hotspots, r.predicted_hotspots,
              r.predicted_hotspots - r.true_hotspots);
      }
    }
    const auto fractions = no_true_fractions(records);
    {
      TableWriter t(dir, "no_true_fractions.csv",
                    "district,model,steps,zero_true,zero_true_predicted,zero_true_not_predicted",
                    written);
      for (const auto& f : fractions) {
        t.row(f.district, f.model, f.steps, csv::format(f.zero_true),
              csv::format(f.zero_true_predicted), csv::format(f.zero_true_not_predicted));
      }
    }
    if (ok_runs > 0) {
      const double denom = static_cast<double>(ok_runs) * config.eval_days();
      std::vector<double> mean_true(domain.cell_count(), 0.0);
      std::map<std::string, std::vector<double>> mean_pred;
      for (const auto& r : result.runs) {
        if (!r.ok) continue;
        for (std::size_t c = 0; c < mean_true.size(); ++c) mean_true[c] += r.heat_true[c];
        for (const auto& [model, heat] : r.heat_predicted) {
          auto& acc = mean_pred[model];
          acc.resize(heat.size(), 0.0);
          for (std::size_t c = 0; c < heat.size(); ++c) acc[c] += heat[c];
        }
      }
      for (double& v : mean_true) v /= denom;
      {
        TableWriter t(dir, "heatmap_true.csv", "ix,iy,district,mean,normalized", written);
        const auto norm = heat_table(mean_true, mean_true).true_rates;
        for (std::size_t c = 0; c < mean_true.size(); ++c) {
          const GridCell cell = domain.cell(c);
          t.row(cell.ix, cell.iy, map.district_of_cell(c), csv::format(mean_true[c]),
                csv::format(norm[c]));
        }
      }
      {
        TableWriter t(dir, "heatmap_predicted.csv", "model,ix,iy,district,mean,normalized",
                      written);
        for (const auto& m : config.models) {
          auto& mp = mean_pred[m.label()];
          for (double& v : mp) v /= denom;
          const auto norm = heat_table(mean_true, mp).predicted;
          for (std::size_t c = 0; c < mp.size(); ++c) {
            const GridCell cell = domain.cell(c);
            t.row(m.label(), cell.ix, cell.iy, map.district_of_cell(c), csv::format(mp[c]),
                  csv::format(norm[c]));
          }
        }
      }
    } else {
      TableWriter(dir, "heatmap_true.csv", "ix,iy,district,mean,normalized", written);
      TableWriter(dir, "heatmap_predicted.csv", "model,ix,iy,district,mean,normalized", written);
    }
    {
      const auto rel = relative_count_summary(records);
      const auto thr = threshold_summary(records);
      const auto over = overprediction(records);
      std::map<std::pair<std::string, int>, std::pair<double, double>> share;  // mean, max
      std::map<std::pair<std::string, int>, std::size_t> share_n;
      for (const auto& r : records) {
        auto& s = share[{r.model, r.district}];
        s.first += r.share;
        s.second = std::max(s.second, r.share);
        ++share_n[{r.model, r.district}];
      }
      TableWriter t(dir, "district_summary.csv",
                    "district,name,reporting_rate,model,steps,relative_count_n,"
                    "relative_count_mean,relative_count_median,relative_count_q1,"
                    "relative_count_q3,threshold_n,threshold_mean,threshold_median,"
                    "threshold_q1,threshold_q3,regular,overprediction_mean,zero_true_fraction,"
                    "share_mean,share_max",
                    written);
      for (std::size_t i = 0; i < rel.size(); ++i) {
        const auto& rc = rel[i];
        const auto& th = thr[i];
        const DistrictRecord& d = districts.by_id(rc.district);
        const auto key = std::pair{rc.model, rc.district};
        t.row(rc.district, d.name, csv::format(d.reporting_rate), rc.model, rc.steps,
              rc.summary.count, num(rc.summary.mean), num(rc.summary.median),
              num(rc.summary.q1), num(rc.summary.q3), th.summary.count, num(th.summary.mean),
              num(th.summary.median), num(th.summary.q1), num(th.summary.q3),
              is_regular(th) ? 1 : 0, num(over[i].summary.mean), csv::format(fractions[i].zero_true),
              csv::format(share.at(key).first / static_cast<double>(share_n.at(key))),
              csv::format(share.at(key).second));
      }
    }
  }

  if (options.fits) {
    {
      TableWriter t(dir, "fits.csv",
                    "run,model,iterations,converged,loglik,mu_bar,theta,omega,sigma_x,sigma_y,"
                    "offspring_mean",
                    written);
      for (const auto& r : result.runs) {
        for (const auto& f : r.sepp_fits) {
          const SeppParams& p = f.report.params;
          t.row(r.run, f.model, f.report.iterations, f.report.converged ? 1 : 0,
                csv::format(f.report.loglik.back()), csv::format(p.mu_bar),
                csv::format(p.theta), csv::format(p.omega), csv::format(p.sigma_x),
                csv::format(p.sigma_y), csv::format(offspring_mean(p)));
        }
      }
    }
    {
      TableWriter t(dir, "bandwidths.csv", "run,model,beta", written);
      for (const auto& r : result.runs) {
        for (const auto& b : r.bandwidths) t.row(r.run, b.model, csv::format(b.beta));
      }
    }
    if (config.dump_fits) {
      for (const auto& r : result.runs) {
        for (const auto& f : r.sepp_fits) {
          const std::string name =
              "fit_trace_run" + std::to_string(r.run) + "_" + f.model + ".csv";
          std::ofstream out(dir / name, std::ios::binary);
          f.report.write_csv(out);
          written.push_back(name);
        }
      }
    }
  }

  if (options.sanity) {
    TableWriter t(dir, "sanity.csv", "district,name,simulated,integral,survey,relative_error",
                  written);
    for (const auto& row : average_sanity(result)) {
      t.row(row.district, row.name, csv::format(row.simulated), csv::format(row.integral),
            csv::format(row.survey), csv::format((row.simulated - row.survey) / row.survey));
    }
  }

  if (options.datasets) {
    TableWriter t(dir, "events.csv", "run,x,y,t,district,in_true,in_reported", written);
    for (const auto& r : result.runs) {
      for (std::size_t i = 0; i < r.true_events.size(); ++i) {
        const Event& e = r.true_events[i];
        t.row(r.run, csv::format(e.x), csv::format(e.y), csv::format(e.t),
              map.district_of_point(e.x, e.y), 1, static_cast<int>(r.reported_flag[i]));
      }
    }
  }

  if (options.predictions) {
    TableWriter t(dir, "predictions.csv", "run,model,day,ix,iy,prediction,is_hotspot", written);
    for (const auto& r : result.runs) {
      for (const auto& p : r.predictions) {
        const GridCell cell = domain.cell(p.cell);
        t.row(r.run, p.model, p.day, cell.ix, cell.iy, csv::format(p.value), p.hotspot ? 1 : 0);
      }
    }
  }

  // Manifest: configuration, seeds, run status and versions.
  const std::string config_text = config.to_json_text();
  json runs = json::array();
  for (const auto& r : result.runs) {
    json entry{{"run", r.run}, {"seed", r.seed}, {"status", r.ok ? "ok" : "failed"},
               {"candidates", r.candidate_count}, {"true_events", r.true_count},
               {"reported_events", r.reported_count}};
    if (!r.ok) {
      entry["failed_stage"] = r.failed_stage;
      entry["error"] = r.error;
    }
    runs.push_back(std::move(entry));
  }
  written.push_back("manifest.json");
  const json manifest{
      {"tool", "hotspot_sim"},
      {"version", kVersion},
      {"config", json::parse(config_text)},
      {"config_hash", hex64(fnv1a(config_text))},
      {"master_seed", config.sim.seed},
      {"total_rate", result.setup.total_rate},
      {"runs_requested", config.runs},
      {"runs_succeeded", ok_runs},
      {"runs_failed", result.runs.size() - ok_runs},
      {"runs", runs},
      {"evaluation_days",
       {{"first", config.eval_start()}, {"last", config.eval_start() + config.eval_days() - 1}}},
      {"training_days",
       {{"first", static_cast<int>(config.sim.burn_in)}, {"last", config.eval_start() - 1}}},
      {"heatmap_average", "evaluation days of successful runs"},
      {"libraries",
       {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
      {"files", written}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  return written;
}

}  // namespace hotspot
