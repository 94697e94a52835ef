#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace actex {

struct PlanarPoint {
  double x = 0;  // meters east of the grid origin
  double y = 0;  // meters north of the grid origin

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

inline double distance_m(PlanarPoint a, PlanarPoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline constexpr double kEarthRadiusM = 6'371'000.0;

// Local equirectangular projection around a declared lon/lat origin. The study
// areas handled here span tens of kilometers, where the projection error is
// far below a cell size.
struct Projection {
  double origin_lon = 0;
  double origin_lat = 0;
  double ref_lat = 0;

  PlanarPoint to_planar(double lon, double lat) const;
  void to_lonlat(PlanarPoint p, double& lon, double& lat) const;
};

using CellId = std::int64_t;

// Row-major planar grid; cells are half-open boxes [a, b) on both axes, so a
// point on a shared edge belongs to the cell with the larger index.
struct Grid {
  PlanarPoint origin;
  double cell_size = 0;  // meters
  std::int64_t n_cols = 0;
  std::int64_t n_rows = 0;

  void validate() const;
  std::int64_t cell_count() const { return n_cols * n_rows; }
  std::optional<CellId> locate(PlanarPoint p) const;
  PlanarPoint centroid(CellId id) const;
};

struct CellDistance {
  CellId cell;
  double distance;  // meters, exact Euclidean centroid distance

  friend bool operator==(const CellDistance&, const CellDistance&) = default;
};

// All cells whose centroid lies within radius_m of p, ascending cell id.
// Candidate columns/rows are derived arithmetically from the radius, so the
// cost is proportional to the cells inside the radius, not the grid size.
std::vector<CellDistance> radius_query(const Grid& grid, PlanarPoint p, double radius_m);

struct Polygon {
  std::vector<PlanarPoint> ring;  // implicitly closed
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  void finalize();  // bbox + simplicity check
  bool contains(PlanarPoint p) const;  // even-odd rule
};

struct RegionRef {
  enum class Kind { inside_study_area, district, unmapped };
  Kind kind = Kind::unmapped;
  std::int64_t district_id = -1;

  friend bool operator==(const RegionRef&, const RegionRef&) = default;
};

struct RegionIndex {
  Polygon study_area;
  std::vector<std::pair<std::int64_t, Polygon>> districts;  // ascending district id

  void validate() const;
  // Study-area membership first, then districts in ascending id, else unmapped.
  RegionRef region_of(PlanarPoint p) const;
};

// GeoJSON-style FeatureCollection of polygons. The study-area feature carries
// a "study_area": true property; district features carry a "district_id"
// integer property. Coordinates are lon/lat and are projected at load time.
RegionIndex load_regions(const std::string& path, const Projection& proj);

}  // namespace actex
