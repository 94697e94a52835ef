#include "actex/geometry.hpp"

#include <algorithm>
#include <fstream>

#include "actex/error.hpp"
#include "json.hpp"

namespace actex {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

PlanarPoint Projection::to_planar(double lon, double lat) const {
  if (!std::isfinite(lon) || !std::isfinite(lat))
    raise(ErrorKind::invalid_coordinate, "non-finite lon/lat");
  if (!(std::abs(lat) < 90.0) || !(std::abs(ref_lat) < 90.0))
    raise(ErrorKind::invalid_coordinate, "latitude out of range (-90, 90)");
  const double x = kEarthRadiusM * std::cos(ref_lat * kDegToRad) * (lon - origin_lon) * kDegToRad;
  const double y = kEarthRadiusM * (lat - origin_lat) * kDegToRad;
  return PlanarPoint{x, y};
}

void Projection::to_lonlat(PlanarPoint p, double& lon, double& lat) const {
  lon = origin_lon + p.x / (kEarthRadiusM * std::cos(ref_lat * kDegToRad)) / kDegToRad;
  lat = origin_lat + p.y / kEarthRadiusM / kDegToRad;
}

void Grid::validate() const {
  if (!(cell_size > 0) || !std::isfinite(cell_size))
    raise(ErrorKind::invalid_argument, "grid cell_size must be > 0");
  if (n_cols <= 0 || n_rows <= 0)
    raise(ErrorKind::invalid_argument, "grid must have positive n_cols and n_rows");
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
    raise(ErrorKind::invalid_argument, "grid origin must be finite");
}

std::optional<CellId> Grid::locate(PlanarPoint p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fx = (p.x - origin.x) / cell_size;
  const double fy = (p.y - origin.y) / cell_size;
  const auto col = static_cast<std::int64_t>(std::floor(fx));
  const auto row = static_cast<std::int64_t>(std::floor(fy));
  if (col < 0 || col >= n_cols || row < 0 || row >= n_rows) return std::nullopt;
  return row * n_cols + col;
}

PlanarPoint Grid::centroid(CellId id) const {
  const std::int64_t row = id / n_cols;
  const std::int64_t col = id % n_cols;
  return PlanarPoint{origin.x + (static_cast<double>(col) + 0.5) * cell_size,
                     origin.y + (static_cast<double>(row) + 0.5) * cell_size};
}

std::vector<CellDistance> radius_query(const Grid& grid, PlanarPoint p, double radius_m) {
  if (!(radius_m > 0)) raise(ErrorKind::invalid_argument, "radius must be > 0");
  // Conservative candidate box, widened one cell to absorb rounding. Clamp in
  // the double domain so huge radii cannot overflow the integer cast.
  auto clamp_col = [&](double c) {
    return static_cast<std::int64_t>(std::clamp(c, 0.0, static_cast<double>(grid.n_cols - 1)));
  };
  auto clamp_row = [&](double r) {
    return static_cast<std::int64_t>(std::clamp(r, 0.0, static_cast<double>(grid.n_rows - 1)));
  };
  const std::int64_t col_lo =
      clamp_col(std::floor((p.x - radius_m - grid.origin.x) / grid.cell_size - 0.5) - 1.0);
  const std::int64_t col_hi =
      clamp_col(std::ceil((p.x + radius_m - grid.origin.x) / grid.cell_size - 0.5) + 1.0);
  const std::int64_t row_lo =
      clamp_row(std::floor((p.y - radius_m - grid.origin.y) / grid.cell_size - 0.5) - 1.0);
  const std::int64_t row_hi =
      clamp_row(std::ceil((p.y + radius_m - grid.origin.y) / grid.cell_size - 0.5) + 1.0);

  std::vector<CellDistance> out;
  for (std::int64_t row = row_lo; row <= row_hi; ++row) {
    for (std::int64_t col = col_lo; col <= col_hi; ++col) {
      const CellId id = row * grid.n_cols + col;
      const double d = distance_m(grid.centroid(id), p);
      if (d <= radius_m) out.push_back(CellDistance{id, d});
    }
  }
  // Row-major traversal already yields ascending ids.
  return out;
}

void Polygon::finalize() {
  if (ring.size() < 3) raise(ErrorKind::invalid_argument, "polygon needs at least 3 vertices");
  // Drop an explicit closing vertex.
  if (ring.size() > 3 && ring.front() == ring.back()) ring.pop_back();
  min_x = min_y = std::numeric_limits<double>::infinity();
  max_x = max_y = -std::numeric_limits<double>::infinity();
  for (const auto& v : ring) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      raise(ErrorKind::invalid_coordinate, "non-finite polygon vertex");
    min_x = std::min(min_x, v.x);
    min_y = std::min(min_y, v.y);
    max_x = std::max(max_x, v.x);
    max_y = std::max(max_y, v.y);
  }
  // Simplicity: no two non-adjacent edges may properly intersect.
  const std::size_t n = ring.size();
  auto cross = [](PlanarPoint o, PlanarPoint a, PlanarPoint b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  auto segments_cross = [&](PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d) {
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (sharing a vertex).
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_cross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]))
        raise(ErrorKind::invalid_argument, "polygon is self-intersecting");
    }
  }
}

bool Polygon::contains(PlanarPoint p) const {
  if (p.x < min_x || p.x > max_x || p.y < min_y || p.y > max_y) return false;
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const PlanarPoint& vi = ring[i];
    const PlanarPoint& vj = ring[j];
    if ((vi.y > p.y) != (vj.y > p.y) &&
        p.x < (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x)
      inside = !inside;
  }
  return inside;
}

void RegionIndex::validate() const {
  for (std::size_t i = 1; i < districts.size(); ++i) {
    if (districts[i - 1].first >= districts[i].first)
      raise(ErrorKind::invalid_argument, "district ids must be unique and ascending");
  }
  // Districts may not reach into the study-area interior: reject contained
  // vertices and crossing boundaries.
  auto cross = [](PlanarPoint o, PlanarPoint a, PlanarPoint b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  auto segments_cross = [&](PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d) {
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  for (const auto& [id, poly] : districts) {
    for (const auto& v : poly.ring) {
      if (study_area.contains(v))
        raise(ErrorKind::invalid_argument,
              "district " + std::to_string(id) + " overlaps the study area");
    }
    for (const auto& v : study_area.ring) {
      if (poly.contains(v))
        raise(ErrorKind::invalid_argument,
              "district " + std::to_string(id) + " overlaps the study area");
    }
    const std::size_t n = study_area.ring.size();
    const std::size_t m = poly.ring.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (segments_cross(study_area.ring[i], study_area.ring[(i + 1) % n], poly.ring[j],
                           poly.ring[(j + 1) % m]))
          raise(ErrorKind::invalid_argument,
                "district " + std::to_string(id) + " overlaps the study area");
      }
    }
  }
}

RegionRef RegionIndex::region_of(PlanarPoint p) const {
  if (study_area.contains(p)) return RegionRef{RegionRef::Kind::inside_study_area, -1};
  for (const auto& [id, poly] : districts) {
    if (poly.contains(p)) return RegionRef{RegionRef::Kind::district, id};
  }
  return RegionRef{RegionRef::Kind::unmapped, -1};
}

RegionIndex load_regions(const std::string& path, const Projection& proj) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::io, "cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::schema, path + ": invalid JSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    raise(ErrorKind::schema, path + ": expected a FeatureCollection with features");

  RegionIndex idx;
  bool have_study_area = false;
  for (const auto& feature : doc["features"]) {
    const auto& geom = feature.at("geometry");
    if (geom.value("type", "") != "Polygon")
      raise(ErrorKind::schema, path + ": only Polygon geometries are supported");
    const auto& rings = geom.at("coordinates");
    if (rings.empty()) raise(ErrorKind::schema, path + ": polygon without rings");
    Polygon poly;
    for (const auto& coord : rings[0]) {
      if (!coord.is_array() || coord.size() < 2)
        raise(ErrorKind::schema, path + ": malformed coordinate pair");
      poly.ring.push_back(proj.to_planar(coord[0].get<double>(), coord[1].get<double>()));
    }
    poly.finalize();
    const auto& props = feature.value("properties", nlohmann::json::object());
    if (props.value("study_area", false)) {
      if (have_study_area) raise(ErrorKind::schema, path + ": multiple study_area features");
      idx.study_area = std::move(poly);
      have_study_area = true;
    } else if (props.contains("district_id")) {
      idx.districts.emplace_back(props["district_id"].get<std::int64_t>(), std::move(poly));
    } else {
      raise(ErrorKind::schema,
            path + ": feature needs either \"study_area\": true or a \"district_id\" property");
    }
  }
  if (!have_study_area) raise(ErrorKind::schema, path + ": no study_area feature");
  std::sort(idx.districts.begin(), idx.districts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  idx.validate();
  return idx;
}

}  // namespace actex
