#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hotspot/model.hpp"

namespace hotspot {

struct DistrictRecord {
  int id = 0;
  std::string name;
  double population = 0.0;
  double victimization_rate = 0.0;  // half-year fraction
  double reporting_rate = 0.0;
};

// Ordered collection of districts with unique ids.
class DistrictTable {
 public:
  DistrictTable() = default;
  explicit DistrictTable(std::vector<DistrictRecord> rows);

  /// The 19 Bogota districts with 2014 survey rates.
  static DistrictTable bogota();
  static DistrictTable read_csv(std::istream& in);
  static DistrictTable read_csv(const std::filesystem::path& path);
  void write_csv(std::ostream& out) const;

  std::size_t size() const { return rows_.size(); }
  const std::vector<DistrictRecord>& rows() const { return rows_; }
  const DistrictRecord& at(std::size_t position) const {
    return rows_.at(position);
  }
  /// Position of a district id in rows(). Throws std::out_of_range.
  std::size_t position_of(int id) const;
  const DistrictRecord& by_id(int id) const { return rows_[position_of(id)]; }

 private:
  std::vector<DistrictRecord> rows_;
};

// Assignment of every grid cell to exactly one district id.
class DistrictMap {
 public:
  DistrictMap() = default;
  DistrictMap(const SpatialDomain& domain, std::vector<int> assignment,
              const DistrictTable& districts);

  /// Power-diagram partition of the cell centres around one seed per
  /// district, with weights adjusted so cell counts track population
  /// (at least min_cells per district). Deterministic in layout_seed.
  static DistrictMap voronoi(const SpatialDomain& domain,
                             const DistrictTable& districts,
                             std::uint64_t layout_seed, int min_cells = 4);

  static DistrictMap read_csv(std::istream& in, const SpatialDomain& domain,
                              const DistrictTable& districts);
  static DistrictMap read_csv(const std::filesystem::path& path,
                              const SpatialDomain& domain,
                              const DistrictTable& districts);
  void write_csv(std::ostream& out) const;

  std::size_t cell_count() const { return assignment_.size(); }
  int district_of_cell(std::size_t cell) const { return assignment_.at(cell); }
  int district_of_point(double x, double y) const {
    return assignment_[domain_.cell_of(x, y)];
  }
  const std::vector<int>& assignment() const { return assignment_; }
  /// Cells of a district in ascending index order.
  const std::vector<std::size_t>& cells_of(int id) const;
  const SpatialDomain& domain() const { return domain_; }

 private:
  void index(const DistrictTable& districts);

  SpatialDomain domain_;
  std::vector<int> assignment_;
  std::vector<int> ids_;
  std::vector<std::vector<std::size_t>> cells_by_district_;
};

}  // namespace hotspot
