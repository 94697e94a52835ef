#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "actex/activity.hpp"
#include "actex/geometry.hpp"
#include "actex/imputation.hpp"

namespace actex {

struct DistributionSpec {
  enum class Family { uniform, exponential };
  Family family = Family::uniform;
  double a = 0;  // uniform: lower bound; exponential: mean
  double b = 0;  // uniform: upper bound

  double sample(RngStream& rng) const;
  void validate(const std::string& what) const;
};

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // planar meters

  PlanarPoint sample(RngStream& rng) const;
  void validate(const std::string& what) const;
};

struct SynthRateBand {
  Sex sex = Sex::female;
  int age_lo = 0, age_hi = 0;
  double prevalence = 0, incidence = 0;
};

struct SynthCohortGroup {
  std::string name = "cohort";
  int count = 0;
  double female_share = 0.5;
  Box home_box;                          // homestead locations
  std::optional<Rates> override_rates;   // generation-only zone rates
  double attendance_prob = 0.5;
};

struct SynthCohortConfig {
  int first_period = 2011, last_period = 2016;
  int age_min = 15, age_max = 54;
  int homesteads_per_group = 50;
  std::vector<SynthRateBand> rates;
  std::vector<SynthCohortGroup> groups;
};

struct GapSpec {
  double prob = 0;              // per emitted fix
  DistributionSpec length;      // seconds
};

struct SynthTrajectoryGroup {
  std::string name = "gps";
  std::optional<Sex> sex;       // fixed sex; otherwise sampled 50/50
  int count = 0;
  int n_anchors = 3;
  Box anchor_box;
  double p_away = 0;            // share of anchors drawn from away_box
  Box away_box;
  DistributionSpec dwell;       // seconds at an anchor
  double travel_speed_mps = 10;
  double fix_interval_s = 60;
  GapSpec gap;
};

struct SynthTrajectoryConfig {
  std::int64_t start_epoch_s = 0;
  double days = 7;
  std::vector<SynthTrajectoryGroup> groups;
};

struct SynthDistrict {
  std::int64_t id = 0;
  Box box;
  double prevalence = 0;
};

struct SynthRegionConfig {
  Box study_area;
  std::vector<SynthDistrict> districts;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  SynthCohortConfig cohort;
  SynthTrajectoryConfig trajectories;
  SynthRegionConfig regions;

  void validate() const;
};

struct Homestead {
  std::int64_t id = 0;
  PlanarPoint location;
};

struct Residency {
  std::string person_id;
  std::int64_t homestead_id = 0;
  int period = 0;
};

struct Participant {
  std::string person_id;
  Sex sex = Sex::female;
  CivilDate birth;
};

struct CohortTruth {
  std::string person_id;
  std::optional<int> sero_period;  // first positive period; nullopt = never
};

struct SynthCohort {
  std::vector<SurveillanceRecord> records;
  RateTable rates;
  std::vector<CohortTruth> truth;
  std::vector<Homestead> homesteads;
  std::vector<Residency> residents;
};

// True status paths simulated from the configured rates; test observations
// emitted under the attendance probability, which yields all four tester
// categories (negative-only, positive-only, both, never tested).
SynthCohort gen_cohort(const SynthConfig& cfg);

struct PathVertex {
  double t = 0;  // seconds from trajectory start
  PlanarPoint p;
};

// Continuous ground-truth trajectory: piecewise linear in time.
struct PiecewisePath {
  std::vector<PathVertex> vertices;

  double duration() const;
  PlanarPoint at(double t) const;
};

struct SynthTrajectories {
  std::vector<FixSequence> fixes;
  std::vector<PiecewisePath> truth;          // parallel to fixes
  std::vector<Participant> participants;     // parallel to fixes
};

// Anchor-based movement: dwell at an anchor, straight constant-speed travel to
// the next, sampled at the fix interval with gaps injected by the gap process.
// Every emitted fix lies exactly on the continuous path.
SynthTrajectories gen_trajectories(const SynthConfig& cfg);

// Exact per-cell occupancy of a continuous path: each linear piece is clipped
// against the grid lines with the same half-open convention as Grid::locate.
// Time outside the grid window is excluded; the result is normalized over
// in-window time.
ActivityDistribution true_occupancy(const PiecewisePath& path, const Grid& grid);

}  // namespace actex
