#include "hotspot/districts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "hotspot/csv.hpp"
#include "hotspot/rng.hpp"

namespace hotspot {

namespace {

constexpr std::string_view kDistrictHeader =
    "id,name,population,victimization_rate,reporting_rate";
constexpr std::string_view kMapHeader = "ix,iy,district_id";

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Largest-remainder apportionment of `total` cells with a per-district floor.
std::vector<int> apportion(const std::vector<double>& shares, int total,
                           int floor_cells) {
  const std::size_t n = shares.size();
  std::vector<int> quota(n, floor_cells);
  int remaining = total - floor_cells * static_cast<int>(n);
  if (remaining < 0) {
    throw std::invalid_argument(
        "DistrictMap: too few cells for the per-district minimum");
  }
  // Distribute what is left so that final counts track shares * total.
  std::vector<double> ideal(n);
  for (std::size_t d = 0; d < n; ++d) ideal[d] = shares[d] * total;
  while (remaining > 0) {
    std::size_t best = 0;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < n; ++d) {
      const double gap = ideal[d] - quota[d];
      if (gap > best_gap) {
        best_gap = gap;
        best = d;
      }
    }
    ++quota[best];
    --remaining;
  }
  return quota;
}

}  // namespace

DistrictTable::DistrictTable(std::vector<DistrictRecord> rows)
    : rows_(std::move(rows)) {
  std::set<int> seen;
  for (const auto& r : rows_) {
    if (!seen.insert(r.id).second) {
      throw std::invalid_argument("DistrictTable: duplicate id " +
                                  std::to_string(r.id));
    }
    if (!(r.population > 0.0)) {
      throw std::invalid_argument("DistrictTable: population must be positive");
    }
    if (!(r.victimization_rate > 0.0 && r.victimization_rate <= 1.0) ||
        !(r.reporting_rate > 0.0 && r.reporting_rate <= 1.0)) {
      throw std::invalid_argument("DistrictTable: rates must lie in (0, 1]");
    }
  }
}

DistrictTable DistrictTable::bogota() {
  return DistrictTable({
      {1, "Antonio Nariño", 109176, 0.15, 0.33},
      {2, "Barrios Unidos", 243465, 0.12, 0.22},
      {3, "Bosa", 673077, 0.13, 0.26},
      {4, "Candelaria", 24088, 0.12, 0.22},
      {5, "Chapinero", 139701, 0.09, 0.28},
      {6, "Ciudad Bolívar", 707569, 0.08, 0.17},
      {7, "Engativá", 887080, 0.11, 0.20},
      {8, "Fontibón", 394648, 0.10, 0.19},
      {9, "Kennedy", 1088443, 0.13, 0.28},
      {10, "Los Mártires", 99119, 0.17, 0.25},
      {11, "Puente Aranda", 258287, 0.14, 0.32},
      {12, "Rafael Uribe Uribe", 374246, 0.12, 0.15},
      {13, "San Cristóbal", 404697, 0.13, 0.21},
      {14, "Santa Fe", 110048, 0.17, 0.17},
      {15, "Suba", 1218513, 0.05, 0.19},
      {16, "Teusaquillo", 153025, 0.14, 0.19},
      {17, "Tunjuelito", 199430, 0.17, 0.23},
      {18, "Usaquén", 501999, 0.18, 0.13},
      {19, "Usme", 457302, 0.09, 0.33},
  });
}

DistrictTable DistrictTable::read_csv(std::istream& in) {
  csv::expect_header(in, kDistrictHeader);
  std::vector<DistrictRecord> rows;
  std::string line;
  while (csv::next_row(in, line)) {
    const auto f = csv::split(line);
    if (f.size() != 5) {
      throw csv::ParseError("districts: expected 5 fields in '" + line + "'");
    }
    DistrictRecord r;
    r.id = static_cast<int>(csv::to_int(f[0]));
    r.name = f[1];
    r.population = csv::to_double(f[2]);
    r.victimization_rate = csv::to_double(f[3]);
    r.reporting_rate = csv::to_double(f[4]);
    rows.push_back(std::move(r));
  }
  return DistrictTable(std::move(rows));
}

DistrictTable DistrictTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

void DistrictTable::write_csv(std::ostream& out) const {
  out << kDistrictHeader << '\n';
  for (const auto& r : rows_) {
    out << r.id << ',' << r.name << ',' << csv::format(r.population) << ','
        << csv::format(r.victimization_rate) << ','
        << csv::format(r.reporting_rate) << '\n';
  }
}

std::size_t DistrictTable::position_of(int id) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].id == id) return i;
  }
  throw std::out_of_range("unknown district id " + std::to_string(id));
}

DistrictMap::DistrictMap(const SpatialDomain& domain,
                         std::vector<int> assignment,
                         const DistrictTable& districts)
    : domain_(domain), assignment_(std::move(assignment)) {
  if (assignment_.size() != domain_.cell_count()) {
    throw std::invalid_argument(
        "DistrictMap: assignment size does not match the grid");
  }
  index(districts);
}

void DistrictMap::index(const DistrictTable& districts) {
  ids_.clear();
  cells_by_district_.assign(districts.size(), {});
  for (const auto& r : districts.rows()) ids_.push_back(r.id);
  for (std::size_t c = 0; c < assignment_.size(); ++c) {
    cells_by_district_[districts.position_of(assignment_[c])].push_back(c);
  }
  for (std::size_t d = 0; d < districts.size(); ++d) {
    if (cells_by_district_[d].empty()) {
      throw std::invalid_argument("DistrictMap: district " +
                                  std::to_string(ids_[d]) + " has no cells");
    }
  }
}

const std::vector<std::size_t>& DistrictMap::cells_of(int id) const {
  for (std::size_t d = 0; d < ids_.size(); ++d) {
    if (ids_[d] == id) return cells_by_district_[d];
  }
  throw std::out_of_range("unknown district id " + std::to_string(id));
}

DistrictMap DistrictMap::voronoi(const SpatialDomain& domain,
                                 const DistrictTable& districts,
                                 std::uint64_t layout_seed, int min_cells) {
  const std::size_t n = districts.size();
  const std::size_t cells = domain.cell_count();
  if (n == 0) throw std::invalid_argument("DistrictMap: no districts");

  double total_pop = 0.0;
  for (const auto& r : districts.rows()) total_pop += r.population;
  std::vector<double> shares(n);
  for (std::size_t d = 0; d < n; ++d) {
    shares[d] = districts.at(d).population / total_pop;
  }
  const std::vector<int> quota =
      apportion(shares, static_cast<int>(cells), min_cells);

  std::vector<double> cx(cells), cy(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const GridCell g = domain.cell(c);
    cx[c] = 0.5 * (g.x_lo + g.x_hi);
    cy[c] = 0.5 * (g.y_lo + g.y_hi);
  }

  // Seeds on a scrambled Halton layout.
  Rng rng = make_rng(stage_seed(layout_seed, "district-seeds"));
  std::uniform_int_distribution<std::uint64_t> offset(1, 997);
  const std::uint64_t start = offset(rng);
  std::vector<double> sx(n), sy(n), weight(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    sx[d] = domain.x_min() + domain.width() * (0.05 + 0.9 * halton(start + d, 2));
    sy[d] = domain.y_min() + domain.height() * (0.05 + 0.9 * halton(start + d, 3));
  }

  std::vector<int> owner(cells, 0);
  std::vector<int> count(n, 0);
  auto assign = [&] {
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t c = 0; c < cells; ++c) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t d = 0; d < n; ++d) {
        const double dx = cx[c] - sx[d], dy = cy[c] - sy[d];
        const double cost = dx * dx + dy * dy - weight[d];
        if (cost < best) {
          best = cost;
          arg = static_cast<int>(d);
        }
      }
      owner[c] = arg;
      ++count[arg];
    }
  };

  // Alternate power-weight updates (toward the quota) with centroid moves.
  const double area_scale = domain.cell_size() * domain.cell_size();
  for (int iter = 0; iter < 400; ++iter) {
    assign();
    for (std::size_t d = 0; d < n; ++d) {
      weight[d] += 0.5 * area_scale * (quota[d] - count[d]);
    }
    if (iter % 4 == 3) {
      std::vector<double> mx(n, 0.0), my(n, 0.0);
      for (std::size_t c = 0; c < cells; ++c) {
        mx[owner[c]] += cx[c];
        my[owner[c]] += cy[c];
      }
      for (std::size_t d = 0; d < n; ++d) {
        if (count[d] > 0) {
          sx[d] = 0.5 * sx[d] + 0.5 * mx[d] / count[d];
          sy[d] = 0.5 * sy[d] + 0.5 * my[d] / count[d];
        }
      }
    }
  }
  assign();

  // Top up any district below the floor with the nearest cells of districts
  // that can spare them.
  for (std::size_t d = 0; d < n; ++d) {
    while (count[d] < min_cells) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t pick = cells;
      for (std::size_t c = 0; c < cells; ++c) {
        const int o = owner[c];
        if (o == static_cast<int>(d) || count[o] <= min_cells) continue;
        const double dx = cx[c] - sx[d], dy = cy[c] - sy[d];
        if (dx * dx + dy * dy < best) {
          best = dx * dx + dy * dy;
          pick = c;
        }
      }
      if (pick == cells) {
        throw std::invalid_argument("DistrictMap: cannot satisfy min_cells");
      }
      --count[owner[pick]];
      owner[pick] = static_cast<int>(d);
      ++count[d];
    }
  }

  std::vector<int> assignment(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    assignment[c] = districts.at(static_cast<std::size_t>(owner[c])).id;
  }
  return DistrictMap(domain, std::move(assignment), districts);
}

DistrictMap DistrictMap::read_csv(std::istream& in, const SpatialDomain& domain,
                                  const DistrictTable& districts) {
  csv::expect_header(in, kMapHeader);
  std::vector<int> assignment(domain.cell_count(), 0);
  std::vector<bool> seen(domain.cell_count(), false);
  std::string line;
  while (csv::next_row(in, line)) {
    const auto f = csv::split(line);
    if (f.size() != 3) {
      throw csv::ParseError("district map: expected 3 fields in '" + line + "'");
    }
    const auto ix = csv::to_int(f[0]);
    const auto iy = csv::to_int(f[1]);
    if (ix < 0 || iy < 0 || ix >= domain.nx() || iy >= domain.ny()) {
      throw csv::ParseError("district map: cell outside grid in '" + line + "'");
    }
    const std::size_t c =
        domain.cell_index(static_cast<int>(ix), static_cast<int>(iy));
    if (seen[c]) {
      throw csv::ParseError("district map: duplicate cell in '" + line + "'");
    }
    seen[c] = true;
    assignment[c] = static_cast<int>(csv::to_int(f[2]));
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw csv::ParseError("district map: not every cell is assigned");
  }
  return DistrictMap(domain, std::move(assignment), districts);
}

DistrictMap DistrictMap::read_csv(const std::filesystem::path& path,
                                  const SpatialDomain& domain,
                                  const DistrictTable& districts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in, domain, districts);
}

void DistrictMap::write_csv(std::ostream& out) const {
  out << kMapHeader << '\n';
  for (std::size_t c = 0; c < assignment_.size(); ++c) {
    const GridCell g = domain_.cell(c);
    out << g.ix << ',' << g.iy << ',' << assignment_[c] << '\n';
  }
}

}  // namespace hotspot
