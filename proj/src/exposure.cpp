#include "actex/exposure.hpp"

#include <algorithm>
#include <cmath>

#include "actex/csv.hpp"
#include "actex/error.hpp"

namespace actex {

double DistrictPrevalence::lookup(std::int64_t district_id) const {
  const auto it = std::lower_bound(
      values.begin(), values.end(), district_id,
      [](const std::pair<std::int64_t, double>& a, std::int64_t id) { return a.first < id; });
  if (it == values.end() || it->first != district_id)
    raise(ErrorKind::incomplete_rate_table,
          "no prevalence for district " + std::to_string(district_id));
  return it->second;
}

DistrictPrevalence load_district_prevalence(const std::string& path, bool percent_units) {
  CsvReader in(path, {"district_id", "prevalence"});
  DistrictPrevalence dp;
  const double upper = percent_units ? 100.0 : 1.0;
  while (in.next()) {
    const std::int64_t id = in.get_int(0);
    double v = in.get_double(1);
    if (!(v >= 0 && v <= upper)) in.fail(1, "prevalence out of range");
    if (percent_units) v /= 100.0;
    dp.values.emplace_back(id, v);
  }
  std::sort(dp.values.begin(), dp.values.end());
  for (std::size_t i = 1; i < dp.values.size(); ++i)
    if (dp.values[i].first == dp.values[i - 1].first)
      raise(ErrorKind::schema, path + ": duplicate district_id " +
                                   std::to_string(dp.values[i].first));
  return dp;
}

double exposure_in(const ActivityDistribution& dist_in, const PrevalenceField& field) {
  double num = 0, den = 0;
  for (const auto& [cell, share] : dist_in.share) {
    const double prev = field.value(cell);
    if (is_missing(prev)) continue;
    num += share * prev;
    den += share;
  }
  return den > 0 ? num / den : missing_value();
}

double exposure_out(std::span<const std::pair<std::int64_t, std::int64_t>> district_seconds,
                    const DistrictPrevalence& dp) {
  double num = 0, den = 0;
  for (const auto& [district, seconds] : district_seconds) {
    if (seconds <= 0) continue;
    num += static_cast<double>(seconds) * dp.lookup(district);
    den += static_cast<double>(seconds);
  }
  return den > 0 ? num / den : missing_value();
}

double exposure_overall(double e_in, double e_out, double fraction_in, double fraction_out) {
  if (is_missing(fraction_in) || is_missing(fraction_out)) return missing_value();
  if (fraction_in == 0) return e_out;
  if (fraction_out == 0) return e_in;
  if (is_missing(e_in) || is_missing(e_out)) return missing_value();
  return fraction_in * e_in + fraction_out * e_out;
}

double exposure_over_cells(const ActivityDistribution& dist, std::span<const std::int64_t> cells,
                           const PrevalenceField& field) {
  double num = 0, den = 0;
  for (const std::int64_t cell : cells) {
    const double prev = field.value(cell);
    if (is_missing(prev)) continue;
    const double share = dist.proportion(cell);
    num += share * prev;
    den += share;
  }
  return den > 0 ? num / den : missing_value();
}

double exposure_home(const ActivityDistribution& dist, const ActivitySpace& home,
                     const PrevalenceField& field) {
  return exposure_over_cells(dist, home.cells, field);
}

HomeClassification classify_home(
    const ActivityDistribution& dist_in,
    std::span<const std::pair<std::int64_t, std::int64_t>> district_seconds) {
  // The largest-share element of the level-50 space is the unit with the
  // largest overall time share, so the argmax over combined units decides.
  HomeClassification out;
  double best_cell_seconds = -1;
  for (const auto& [cell, share] : dist_in.share) {
    const double secs = share * dist_in.total_seconds;
    if (secs > best_cell_seconds) best_cell_seconds = secs;
  }
  std::int64_t best_district = -1;
  std::int64_t best_district_seconds = -1;
  for (const auto& [district, secs] : district_seconds) {
    if (secs > best_district_seconds) {
      best_district_seconds = secs;
      best_district = district;
    }
  }
  if (best_cell_seconds < 0 && best_district_seconds < 0) return out;  // undefined
  out.defined = true;
  // Ties go to the grid cell.
  out.inside = best_cell_seconds >= static_cast<double>(best_district_seconds);
  if (!out.inside) out.home_district = best_district;
  return out;
}

}  // namespace actex
