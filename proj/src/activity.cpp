#include "actex/activity.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "actex/error.hpp"

namespace actex {

void FixSequence::validate() const {
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    if (!std::isfinite(fixes[i].p.x) || !std::isfinite(fixes[i].p.y))
      raise(ErrorKind::invalid_coordinate, "person " + person_id + ": non-finite fix coordinates");
    if (i > 0 && fixes[i].t <= fixes[i - 1].t)
      raise(ErrorKind::record, "person " + person_id + ": timestamps not strictly increasing");
  }
}

SegmentSet segment(const FixSequence& fixes, std::int64_t gap_threshold_s) {
  if (gap_threshold_s <= 0) raise(ErrorKind::invalid_argument, "gap threshold must be > 0");
  SegmentSet out;
  out.person_id = fixes.person_id;
  for (std::size_t i = 0; i + 1 < fixes.fixes.size(); ++i) {
    const GpsFix& a = fixes.fixes[i];
    const GpsFix& b = fixes.fixes[i + 1];
    if (b.t - a.t > gap_threshold_s) {
      ++out.gap_count;
      continue;
    }
    out.intervals.push_back(RetainedInterval{a.t, b.t, a.p, b.p});
    out.retained_seconds += b.t - a.t;
  }
  return out;
}

double ActivityDistribution::proportion(std::int64_t unit) const {
  const auto it = std::lower_bound(
      share.begin(), share.end(), unit,
      [](const std::pair<std::int64_t, double>& a, std::int64_t u) { return a.first < u; });
  if (it != share.end() && it->first == unit) return it->second;
  return 0.0;
}

ActivityDistribution distribution_from_durations(
    std::string id, std::vector<std::pair<std::int64_t, double>> unit_seconds) {
  std::sort(unit_seconds.begin(), unit_seconds.end());
  double total = 0;
  for (const auto& [unit, secs] : unit_seconds) total += secs;
  if (!(total > 0)) raise(ErrorKind::empty_support, id + ": no same-unit time observed");
  ActivityDistribution dist;
  dist.id = std::move(id);
  dist.total_seconds = total;
  dist.share.reserve(unit_seconds.size());
  for (const auto& [unit, secs] : unit_seconds) {
    if (secs > 0) dist.share.emplace_back(unit, secs / total);
  }
  return dist;
}

ActivityDistribution cpt_estimate(const SegmentSet& segs, const Grid& grid) {
  std::map<std::int64_t, double> seconds;
  for (const auto& iv : segs.intervals) {
    const auto c0 = grid.locate(iv.p0);
    const auto c1 = grid.locate(iv.p1);
    if (c0 && c1 && *c0 == *c1) seconds[*c0] += static_cast<double>(iv.seconds());
  }
  std::vector<std::pair<std::int64_t, double>> unit_seconds(seconds.begin(), seconds.end());
  if (unit_seconds.empty())
    raise(ErrorKind::empty_support, "person " + segs.person_id + ": no same-cell time observed");
  return distribution_from_durations(segs.person_id, std::move(unit_seconds));
}

PoolResult pool(std::span<const ActivityDistribution* const> members, PoolMode mode,
                std::string id) {
  if (members.empty()) raise(ErrorKind::invalid_argument, "pool requires at least one member");
  PoolResult out;
  std::map<std::int64_t, double> acc;
  double total_seconds = 0;
  for (const ActivityDistribution* m : members) {
    if (m->empty()) {
      ++out.skipped;
      continue;
    }
    const double w = mode == PoolMode::duration_weighted ? m->total_seconds : 1.0;
    for (const auto& [unit, p] : m->share) acc[unit] += w * p;
    total_seconds += m->total_seconds;
  }
  if (acc.empty()) raise(ErrorKind::empty_support, id + ": all members have empty support");
  double norm = 0;
  for (const auto& [unit, v] : acc) norm += v;
  out.dist.id = std::move(id);
  out.dist.total_seconds = total_seconds;
  out.dist.share.reserve(acc.size());
  for (const auto& [unit, v] : acc) out.dist.share.emplace_back(unit, v / norm);
  return out;
}

namespace {

// Decreasing share, ties by ascending unit id.
std::vector<std::pair<std::int64_t, double>> greedy_order(const ActivityDistribution& dist) {
  std::vector<std::pair<std::int64_t, double>> order(dist.share.begin(), dist.share.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return order;
}

}  // namespace

ActivitySpace activity_space(const ActivityDistribution& dist, double gamma) {
  if (!(gamma > 0 && gamma <= 100))
    raise(ErrorKind::invalid_argument, "gamma must be in (0, 100]");
  if (dist.empty()) raise(ErrorKind::empty_support, dist.id + ": empty activity distribution");

  const auto order = greedy_order(dist);
  double sum_all = 0;
  for (const auto& [unit, p] : order) sum_all += p;
  const double target = std::min(gamma / 100.0, sum_all);

  ActivitySpace space;
  space.gamma = gamma;
  double captured = 0;
  for (const auto& [unit, p] : order) {
    space.cells.push_back(unit);
    captured += p;
    if (captured >= target) break;
  }
  space.captured = captured;
  return space;
}

bool ActivitySpace::contains(std::int64_t cell) const {
  return std::find(cells.begin(), cells.end(), cell) != cells.end();
}

ActivitySpace collective_space(std::span<const ActivitySpace> spaces) {
  if (spaces.empty()) raise(ErrorKind::invalid_argument, "collective space of no members");
  ActivitySpace out;
  out.gamma = spaces.front().gamma;
  out.captured = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::int64_t> cells;
  for (const auto& s : spaces) {
    if (s.gamma != out.gamma)
      raise(ErrorKind::level_mismatch, "collective space over mixed activity-space levels");
    cells.insert(cells.end(), s.cells.begin(), s.cells.end());
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  out.cells = std::move(cells);
  return out;
}

double SplitOutcome::fraction_in() const {
  const std::int64_t classified = inside_seconds + outside_seconds;
  if (classified == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(inside_seconds) / static_cast<double>(classified);
}

double SplitOutcome::fraction_out() const {
  const std::int64_t classified = inside_seconds + outside_seconds;
  if (classified == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(outside_seconds) / static_cast<double>(classified);
}

SplitOutcome split_in_out(const SegmentSet& segs, const RegionIndex& idx) {
  SplitOutcome out;
  out.inside.person_id = segs.person_id;
  out.inside.gap_count = segs.gap_count;
  std::map<std::int64_t, std::int64_t> district_acc;
  for (const auto& iv : segs.intervals) {
    const RegionRef r0 = idx.region_of(iv.p0);
    const RegionRef r1 = idx.region_of(iv.p1);
    if (r0 != r1) {
      out.mixed_seconds += iv.seconds();
      continue;
    }
    switch (r0.kind) {
      case RegionRef::Kind::inside_study_area:
        out.inside.intervals.push_back(iv);
        out.inside.retained_seconds += iv.seconds();
        out.inside_seconds += iv.seconds();
        break;
      case RegionRef::Kind::district:
        district_acc[r0.district_id] += iv.seconds();
        out.outside_seconds += iv.seconds();
        break;
      case RegionRef::Kind::unmapped:
        out.unmapped_seconds += iv.seconds();
        break;
    }
  }
  out.district_seconds.assign(district_acc.begin(), district_acc.end());
  return out;
}

}  // namespace actex
