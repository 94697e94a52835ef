#include "actex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "actex/error.hpp"

namespace actex {

double DistributionSpec::sample(RngStream& rng) const {
  switch (family) {
    case Family::uniform: return rng.uniform(a, b);
    case Family::exponential: return rng.exponential(a);
  }
  return 0;
}

void DistributionSpec::validate(const std::string& what) const {
  if (family == Family::uniform) {
    if (!(a >= 0 && b >= a)) raise(ErrorKind::config, what + ": uniform needs 0 <= min <= max");
  } else {
    if (!(a > 0)) raise(ErrorKind::config, what + ": exponential needs mean > 0");
  }
}

PlanarPoint Box::sample(RngStream& rng) const {
  return PlanarPoint{rng.uniform(x0, x1), rng.uniform(y0, y1)};
}

void Box::validate(const std::string& what) const {
  if (!(x1 > x0 && y1 > y0)) raise(ErrorKind::config, what + ": box must have positive extent");
  for (const double v : {x0, y0, x1, y1}) {
    if (!(std::abs(v) <= 1e12))
      raise(ErrorKind::config, what + ": coordinates must be planar meters within 1e12");
  }
}

void SynthConfig::validate() const {
  if (cohort.first_period > cohort.last_period)
    raise(ErrorKind::config, "cohort first_period after last_period");
  if (cohort.age_min > cohort.age_max) raise(ErrorKind::config, "cohort age_min > age_max");
  if (cohort.rates.empty()) raise(ErrorKind::config, "cohort needs at least one rate band");
  for (const auto& g : cohort.groups) {
    if (g.count < 0) raise(ErrorKind::config, "cohort group count must be >= 0");
    if (!(g.female_share >= 0 && g.female_share <= 1))
      raise(ErrorKind::config, "female_share must be in [0, 1]");
    if (!(g.attendance_prob >= 0 && g.attendance_prob <= 1))
      raise(ErrorKind::config, "attendance_prob must be in [0, 1]");
    g.home_box.validate("cohort group " + g.name + " home_box");
  }
  for (const auto& g : trajectories.groups) {
    if (g.count < 0) raise(ErrorKind::config, "trajectory group count must be >= 0");
    if (g.n_anchors < 1) raise(ErrorKind::config, "n_anchors must be >= 1");
    if (!(g.p_away >= 0 && g.p_away <= 1)) raise(ErrorKind::config, "p_away must be in [0, 1]");
    if (!(g.travel_speed_mps > 0)) raise(ErrorKind::config, "travel_speed_mps must be > 0");
    if (!(g.fix_interval_s >= 1)) raise(ErrorKind::config, "fix_interval_s must be >= 1 second");
    if (!(g.gap.prob >= 0 && g.gap.prob <= 1)) raise(ErrorKind::config, "gap prob in [0, 1]");
    g.anchor_box.validate("trajectory group " + g.name + " anchor_box");
    if (g.p_away > 0) g.away_box.validate("trajectory group " + g.name + " away_box");
    g.dwell.validate("trajectory group " + g.name + " dwell");
    if (g.gap.prob > 0) g.gap.length.validate("trajectory group " + g.name + " gap length");
  }
  if (!(trajectories.days > 0)) raise(ErrorKind::config, "trajectory days must be > 0");
  regions.study_area.validate("regions study_area");
  for (const auto& d : regions.districts) {
    d.box.validate("district " + std::to_string(d.id));
    if (!(d.prevalence >= 0 && d.prevalence <= 1))
      raise(ErrorKind::config, "district prevalence must be in [0, 1]");
  }
}

namespace {

std::string person_name(const std::string& group, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d", group.c_str(), index);
  return buf;
}

}  // namespace

SynthCohort gen_cohort(const SynthConfig& cfg) {
  cfg.validate();
  const auto& cc = cfg.cohort;
  SynthCohort out;

  for (const auto& band : cc.rates) {
    for (int period = cc.first_period; period <= cc.last_period; ++period)
      out.rates.insert(band.sex, band.age_lo, band.age_hi, period,
                       Rates{band.prevalence, band.incidence});
  }
  out.rates.finalize();

  std::int64_t next_homestead = 1;
  for (const auto& group : cc.groups) {
    RngStream hs_rng(derive_stream_seed(cfg.seed, 0, "homesteads:" + group.name));
    std::vector<std::int64_t> group_homesteads;
    for (int h = 0; h < cc.homesteads_per_group; ++h) {
      out.homesteads.push_back(Homestead{next_homestead, group.home_box.sample(hs_rng)});
      group_homesteads.push_back(next_homestead++);
    }

    for (int i = 0; i < group.count; ++i) {
      const std::string id = person_name(group.name, i);
      RngStream rng(derive_stream_seed(cfg.seed, 0, id));

      SurveillanceRecord rec;
      rec.person_id = id;
      rec.sex = rng.bernoulli(group.female_share) ? Sex::female : Sex::male;
      // Age at the start of the first period, uniform over the configured
      // range; Jan 1 birthdays keep period-start ages exact.
      const int age0 = cc.age_min + static_cast<int>(rng.below(
                                        static_cast<std::uint64_t>(cc.age_max - cc.age_min + 1)));
      rec.birth = CivilDate{cc.first_period - age0, 1, 1};
      const int n_periods = cc.last_period - cc.first_period + 1;
      rec.entry_period = cc.first_period + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_periods)));
      rec.exit_period =
          rec.entry_period +
          static_cast<int>(rng.below(static_cast<std::uint64_t>(cc.last_period - rec.entry_period + 1)));

      // True path from the generating rates (table rates unless overridden).
      auto rate_at = [&](int period) {
        if (group.override_rates) return *group.override_rates;
        return out.rates.lookup(rec.sex, rec.age_at_period(period), period);
      };
      std::vector<std::uint8_t> truth(static_cast<std::size_t>(rec.exit_period - rec.entry_period + 1));
      bool positive = rng.bernoulli(rate_at(rec.entry_period).prevalence);
      truth[0] = positive ? 1 : 0;
      std::optional<int> sero = positive ? std::optional<int>(rec.entry_period) : std::nullopt;
      for (int t = rec.entry_period + 1; t <= rec.exit_period; ++t) {
        if (!positive && rng.bernoulli(rate_at(t).incidence)) {
          positive = true;
          sero = t;
        }
        truth[static_cast<std::size_t>(t - rec.entry_period)] = positive ? 1 : 0;
      }

      for (int t = rec.entry_period; t <= rec.exit_period; ++t) {
        if (rng.bernoulli(group.attendance_prob))
          rec.tests.push_back(
              TestObservation{t, truth[static_cast<std::size_t>(t - rec.entry_period)] == 1});
      }
      rec.validate();

      // Sticky residency: one homestead, with occasional moves inside the zone.
      std::int64_t homestead = group_homesteads[rng.below(group_homesteads.size())];
      for (int t = rec.entry_period; t <= rec.exit_period; ++t) {
        if (rng.bernoulli(0.1)) homestead = group_homesteads[rng.below(group_homesteads.size())];
        out.residents.push_back(Residency{id, homestead, t});
      }

      out.truth.push_back(CohortTruth{id, sero});
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

double PiecewisePath::duration() const {
  return vertices.empty() ? 0 : vertices.back().t - vertices.front().t;
}

PlanarPoint PiecewisePath::at(double t) const {
  if (vertices.empty()) raise(ErrorKind::invalid_argument, "empty path");
  if (t <= vertices.front().t) return vertices.front().p;
  if (t >= vertices.back().t) return vertices.back().p;
  const auto it = std::upper_bound(vertices.begin(), vertices.end(), t,
                                   [](double v, const PathVertex& pv) { return v < pv.t; });
  const PathVertex& b = *it;
  const PathVertex& a = *(it - 1);
  if (b.t == a.t) return a.p;
  const double s = (t - a.t) / (b.t - a.t);
  return PlanarPoint{a.p.x + s * (b.p.x - a.p.x), a.p.y + s * (b.p.y - a.p.y)};
}

SynthTrajectories gen_trajectories(const SynthConfig& cfg) {
  cfg.validate();
  const auto& tc = cfg.trajectories;
  SynthTrajectories out;
  const double horizon = tc.days * 86400.0;

  for (const auto& group : tc.groups) {
    for (int i = 0; i < group.count; ++i) {
      const std::string id = person_name(group.name, i);
      RngStream rng(derive_stream_seed(cfg.seed, 1, id));

      Participant person;
      person.person_id = id;
      person.sex = group.sex ? *group.sex : (rng.bernoulli(0.5) ? Sex::female : Sex::male);
      person.birth = CivilDate{year_of_epoch_seconds(tc.start_epoch_s) -
                                   (20 + static_cast<int>(rng.below(11))),
                               7, 1};

      std::vector<PlanarPoint> anchors;
      anchors.push_back(group.anchor_box.sample(rng));  // home anchor
      for (int a = 1; a < group.n_anchors; ++a) {
        const bool away = group.p_away > 0 && rng.bernoulli(group.p_away);
        anchors.push_back((away ? group.away_box : group.anchor_box).sample(rng));
      }

      PiecewisePath path;
      std::size_t current = 0;
      double t = 0;
      path.vertices.push_back(PathVertex{0, anchors[current]});
      while (t < horizon) {
        const double dwell = group.dwell.sample(rng);
        t += dwell;
        path.vertices.push_back(PathVertex{t, anchors[current]});
        if (t >= horizon) break;
        std::size_t next = current;
        if (anchors.size() > 1)
          while (next == current) next = rng.below(anchors.size());
        const double travel =
            distance_m(anchors[current], anchors[next]) / group.travel_speed_mps;
        t += travel;
        current = next;
        path.vertices.push_back(PathVertex{t, anchors[current]});
      }
      // Clamp the path to the horizon.
      while (path.vertices.size() > 1 && path.vertices[path.vertices.size() - 2].t >= horizon)
        path.vertices.pop_back();
      if (path.vertices.back().t > horizon) {
        const PlanarPoint end = path.at(horizon);
        path.vertices.back() = PathVertex{horizon, end};
      }

      FixSequence fixes;
      fixes.person_id = id;
      double ft = 0;
      while (ft <= horizon) {
        // Emission times are whole seconds; the position is sampled at the
        // emitted time so every fix lies exactly on the path.
        const auto t_emit = static_cast<std::int64_t>(std::llround(ft));
        fixes.fixes.push_back(
            GpsFix{tc.start_epoch_s + t_emit, path.at(static_cast<double>(t_emit))});
        ft += group.fix_interval_s;
        if (group.gap.prob > 0 && rng.bernoulli(group.gap.prob)) ft += group.gap.length.sample(rng);
      }
      fixes.validate();

      out.fixes.push_back(std::move(fixes));
      out.truth.push_back(std::move(path));
      out.participants.push_back(std::move(person));
    }
  }
  return out;
}

namespace {

// Splits [t0, t1] over the cells a linear segment traverses, accumulating the
// per-cell time. Crossing parameters come from the grid lines; each slice is
// attributed by its midpoint, which respects the half-open cell convention.
void accumulate_segment(const Grid& grid, PlanarPoint a, PlanarPoint b, double dt,
                        std::map<std::int64_t, double>& acc, double& in_window) {
  if (dt <= 0) return;
  if (a == b) {
    const auto cell = grid.locate(a);
    if (cell) {
      acc[*cell] += dt;
      in_window += dt;
    }
    return;
  }
  std::vector<double> cuts{0.0, 1.0};
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  auto add_axis_cuts = [&](double a0, double d, double origin) {
    if (d == 0) return;
    const double lo = std::min(a0, a0 + d);
    const double hi = std::max(a0, a0 + d);
    const auto k_lo = static_cast<std::int64_t>(std::ceil((lo - origin) / grid.cell_size));
    const auto k_hi = static_cast<std::int64_t>(std::floor((hi - origin) / grid.cell_size));
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double boundary = origin + static_cast<double>(k) * grid.cell_size;
      const double s = (boundary - a0) / d;
      if (s > 0 && s < 1) cuts.push_back(s);
    }
  };
  add_axis_cuts(a.x, dx, grid.origin.x);
  add_axis_cuts(a.y, dy, grid.origin.y);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double s0 = cuts[i];
    const double s1 = cuts[i + 1];
    if (s1 <= s0) continue;
    const double sm = 0.5 * (s0 + s1);
    const auto cell = grid.locate(PlanarPoint{a.x + sm * dx, a.y + sm * dy});
    if (cell) {
      acc[*cell] += (s1 - s0) * dt;
      in_window += (s1 - s0) * dt;
    }
  }
}

}  // namespace

ActivityDistribution true_occupancy(const PiecewisePath& path, const Grid& grid) {
  grid.validate();
  if (path.duration() <= 0)
    raise(ErrorKind::invalid_argument, "true occupancy of a zero-duration path");
  std::map<std::int64_t, double> acc;
  double in_window = 0;
  for (std::size_t i = 0; i + 1 < path.vertices.size(); ++i) {
    const auto& a = path.vertices[i];
    const auto& b = path.vertices[i + 1];
    accumulate_segment(grid, a.p, b.p, b.t - a.t, acc, in_window);
  }
  if (!(in_window > 0))
    raise(ErrorKind::empty_support, "path spends no time inside the grid window");
  ActivityDistribution dist;
  dist.id = "truth";
  dist.total_seconds = in_window;
  dist.share.reserve(acc.size());
  for (const auto& [cell, secs] : acc) dist.share.emplace_back(cell, secs / in_window);
  return dist;
}

}  // namespace actex
