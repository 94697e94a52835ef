#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actex/geometry.hpp"

namespace actex {

struct GpsFix {
  std::int64_t t = 0;  // epoch seconds UTC
  PlanarPoint p;
};

struct FixSequence {
  std::string person_id;
  std::vector<GpsFix> fixes;  // strictly increasing timestamps

  void validate() const;
};

struct RetainedInterval {
  std::int64_t t0 = 0, t1 = 0;
  PlanarPoint p0, p1;

  std::int64_t seconds() const { return t1 - t0; }
};

// Intervals between consecutive fixes that are short enough to keep. No fix is
// dropped, only the intervals longer than the gap threshold.
struct SegmentSet {
  std::string person_id;
  std::vector<RetainedInterval> intervals;  // time ordered, non-overlapping
  std::int64_t gap_count = 0;
  std::int64_t retained_seconds = 0;
};

SegmentSet segment(const FixSequence& fixes, std::int64_t gap_threshold_s = 1800);

// Time-share vector over units (grid cells, or districts when lifted to the
// region scale). Support is sorted by unit id; proportions sum to 1.
struct ActivityDistribution {
  std::string id;
  std::vector<std::pair<std::int64_t, double>> share;
  double total_seconds = 0;  // same-unit retained duration behind the shares

  double proportion(std::int64_t unit) const;
  bool empty() const { return share.empty(); }
};

// Conservative proportional-time estimator: only retained intervals whose two
// endpoint fixes land in the same grid cell contribute; transition intervals
// and gaps are excluded from numerator and denominator alike.
ActivityDistribution cpt_estimate(const SegmentSet& segs, const Grid& grid);

ActivityDistribution distribution_from_durations(
    std::string id, std::vector<std::pair<std::int64_t, double>> unit_seconds);

enum class PoolMode { duration_weighted, unweighted };

struct PoolResult {
  ActivityDistribution dist;
  int skipped = 0;  // members with empty support
};

// Subgroup activity distribution. duration_weighted scales each member by the
// time it contributed; unweighted is the plain mean of member distributions.
PoolResult pool(std::span<const ActivityDistribution* const> members, PoolMode mode,
                std::string id = "group");

// Level-gamma activity space: cells in decreasing share order (ties broken by
// ascending id) until at least gamma% of the member's time is covered.
struct ActivitySpace {
  double gamma = 100;
  std::vector<std::int64_t> cells;  // greedy order: decreasing share, then id
  double captured = 0;              // NaN for collective unions

  bool contains(std::int64_t cell) const;
};

ActivitySpace activity_space(const ActivityDistribution& dist, double gamma);

// Union of same-level spaces; the captured share is left undefined.
ActivitySpace collective_space(std::span<const ActivitySpace> spaces);

struct SplitOutcome {
  SegmentSet inside;                                             // both endpoints in the study area
  std::vector<std::pair<std::int64_t, std::int64_t>> district_seconds;  // ascending district id
  std::int64_t inside_seconds = 0;
  std::int64_t outside_seconds = 0;   // sum over same-district intervals
  std::int64_t mixed_seconds = 0;     // endpoints in different regions, dropped
  std::int64_t unmapped_seconds = 0;  // endpoints in no region, dropped

  double fraction_in() const;
  double fraction_out() const;
};

// CPT logic lifted to regions: an interval counts as inside only when both
// endpoints are in the study area, and counts for a district only when both
// endpoints map to that district; everything else is dropped and tallied.
SplitOutcome split_in_out(const SegmentSet& segs, const RegionIndex& idx);

}  // namespace actex
