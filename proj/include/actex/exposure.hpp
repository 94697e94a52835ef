#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actex/activity.hpp"
#include "actex/prevalence.hpp"

namespace actex {

struct DistrictPrevalence {
  std::vector<std::pair<std::int64_t, double>> values;  // ascending district id

  double lookup(std::int64_t district_id) const;  // throws incomplete_rate_table
};

DistrictPrevalence load_district_prevalence(const std::string& path, bool percent_units);

// All exposure measures are prevalence proportions in [0, 1], or NaN when the
// measure is undefined for the participant.
struct ExposureProfile {
  std::string person_id;
  double e_in = missing_value();
  double e_out = missing_value();
  double e_overall = missing_value();
  double e_home = missing_value();
  double fraction_in = missing_value();
  double fraction_out = missing_value();
};

// Time-share weighted mean of cell prevalences over the visited cells with a
// defined field value, renormalized over those cells.
double exposure_in(const ActivityDistribution& dist_in, const PrevalenceField& field);

// Duration-weighted mean of district prevalences.
double exposure_out(std::span<const std::pair<std::int64_t, std::int64_t>> district_seconds,
                    const DistrictPrevalence& dp);

double exposure_overall(double e_in, double e_out, double fraction_in, double fraction_out);

// Share-weighted prevalence restricted to the home-space cells, renormalized
// over cells with a defined value. `home` must come from the same distribution.
double exposure_home(const ActivityDistribution& dist, const ActivitySpace& home,
                     const PrevalenceField& field);

// Share-weighted prevalence over an arbitrary cell set of the distribution;
// exposure_home is this at the level-50 space.
double exposure_over_cells(const ActivityDistribution& dist, std::span<const std::int64_t> cells,
                           const PrevalenceField& field);

struct HomeClassification {
  bool defined = false;
  bool inside = false;
  std::int64_t home_district = -1;  // valid when defined && !inside
};

// A participant's home is inside the study area iff the largest-share element
// of the level-50 space over the combined cell + district time distribution is
// a grid cell; otherwise the home district is the district with the largest
// time share.
HomeClassification classify_home(const ActivityDistribution& dist_in,
                                 std::span<const std::pair<std::int64_t, std::int64_t>> district_seconds);

}  // namespace actex
