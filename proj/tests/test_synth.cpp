#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "actex/error.hpp"
#include "actex/synth.hpp"

using namespace actex;

namespace {

SynthConfig base_config() {
  SynthConfig cfg;
  cfg.seed = 42;
  cfg.cohort.first_period = 2011;
  cfg.cohort.last_period = 2016;
  cfg.cohort.age_min = 20;
  cfg.cohort.age_max = 30;
  cfg.cohort.homesteads_per_group = 10;
  for (const Sex sex : {Sex::female, Sex::male})
    cfg.cohort.rates.push_back(SynthRateBand{sex, 0, 120, 0.2, 0.05});
  cfg.cohort.groups.push_back(
      SynthCohortGroup{"res", 300, 0.5, Box{0, 0, 5000, 5000}, std::nullopt, 0.5});

  cfg.trajectories.start_epoch_s = 1546300800;  // 2019-01-01T00:00:00Z
  cfg.trajectories.days = 2;
  SynthTrajectoryGroup g;
  g.name = "gps";
  g.count = 5;
  g.n_anchors = 3;
  g.anchor_box = Box{500, 500, 4500, 4500};
  g.dwell = DistributionSpec{DistributionSpec::Family::uniform, 3600, 14400};
  g.travel_speed_mps = 10;
  g.fix_interval_s = 60;
  cfg.trajectories.groups.push_back(g);

  cfg.regions.study_area = Box{0, 0, 5000, 5000};
  cfg.regions.districts.push_back(SynthDistrict{1, Box{6000, 0, 12000, 5000}, 0.2});
  return cfg;
}

}  // namespace

TEST_CASE("cohort generation is deterministic in the seed") {
  const auto cfg = base_config();
  const auto a = gen_cohort(cfg);
  const auto b = gen_cohort(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].person_id == b.records[i].person_id);
    CHECK(a.records[i].entry_period == b.records[i].entry_period);
    CHECK(a.records[i].tests.size() == b.records[i].tests.size());
  }
  auto cfg2 = cfg;
  cfg2.seed = 43;
  const auto c = gen_cohort(cfg2);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    any_difference = any_difference || a.records[i].tests.size() != c.records[i].tests.size() ||
                     a.records[i].entry_period != c.records[i].entry_period;
  CHECK(any_difference);
}

TEST_CASE("attendance probability 1 tests every period; 0 tests none") {
  auto cfg = base_config();
  cfg.cohort.groups[0].attendance_prob = 1.0;
  const auto full = gen_cohort(cfg);
  for (const auto& rec : full.records)
    CHECK(static_cast<int>(rec.tests.size()) == rec.exit_period - rec.entry_period + 1);

  cfg.cohort.groups[0].attendance_prob = 0.0;
  const auto never = gen_cohort(cfg);
  for (const auto& rec : never.records) CHECK(rec.tests.empty());
}

TEST_CASE("generated records are internally consistent") {
  const auto cohort = gen_cohort(base_config());
  REQUIRE(cohort.records.size() == 300);
  CHECK(cohort.truth.size() == cohort.records.size());
  for (std::size_t i = 0; i < cohort.records.size(); ++i) {
    const auto& rec = cohort.records[i];
    rec.validate();  // throws on inconsistency
    const auto& truth = cohort.truth[i];
    for (const auto& test : rec.tests) {
      const bool truly_positive = truth.sero_period && test.period >= *truth.sero_period;
      CHECK(test.positive == truly_positive);
    }
  }
  // Each person has a residency row for every period of their window.
  std::map<std::string, int> residency_rows;
  for (const auto& r : cohort.residents) ++residency_rows[r.person_id];
  for (const auto& rec : cohort.records)
    CHECK(residency_rows[rec.person_id] == rec.exit_period - rec.entry_period + 1);
}

TEST_CASE("seroconversion frequency approximates the incidence") {
  auto cfg = base_config();
  cfg.cohort.groups[0].count = 50000;
  cfg.cohort.groups[0].attendance_prob = 0;
  const auto cohort = gen_cohort(cfg);
  // Negative entrants at their second period convert at rate lambda.
  std::int64_t at_risk = 0, converted = 0;
  for (std::size_t i = 0; i < cohort.records.size(); ++i) {
    const auto& rec = cohort.records[i];
    if (rec.exit_period == rec.entry_period) continue;
    const auto& sero = cohort.truth[i].sero_period;
    if (sero && *sero == rec.entry_period) continue;  // positive on entry
    ++at_risk;
    if (sero && *sero == rec.entry_period + 1) ++converted;
  }
  const double lambda = 0.05;
  const double freq = static_cast<double>(converted) / static_cast<double>(at_risk);
  const double se = std::sqrt(lambda * (1 - lambda) / static_cast<double>(at_risk));
  CHECK(std::abs(freq - lambda) <= 3 * se);
}

TEST_CASE("trajectories: determinism, gap control, fixes on the path") {
  auto cfg = base_config();
  const auto a = gen_trajectories(cfg);
  const auto b = gen_trajectories(cfg);
  REQUIRE(a.fixes.size() == 5);
  for (std::size_t i = 0; i < a.fixes.size(); ++i) {
    REQUIRE(a.fixes[i].fixes.size() == b.fixes[i].fixes.size());
    CHECK(a.fixes[i].fixes.back().p == b.fixes[i].fixes.back().p);
  }

  // No gap process: consecutive fixes exactly at the interval.
  for (const auto& seq : a.fixes)
    for (std::size_t i = 1; i < seq.fixes.size(); ++i)
      CHECK(seq.fixes[i].t - seq.fixes[i - 1].t == 60);

  // Every fix lies exactly on the continuous truth path.
  for (std::size_t p = 0; p < a.fixes.size(); ++p) {
    const auto& path = a.truth[p];
    for (std::size_t i = 0; i < a.fixes[p].fixes.size(); i += 17) {
      const auto& fix = a.fixes[p].fixes[i];
      const PlanarPoint on_path =
          path.at(static_cast<double>(fix.t - cfg.trajectories.start_epoch_s));
      CHECK(fix.p.x == on_path.x);
      CHECK(fix.p.y == on_path.y);
    }
  }

  cfg.trajectories.groups[0].gap.prob = 0.2;
  cfg.trajectories.groups[0].gap.length =
      DistributionSpec{DistributionSpec::Family::exponential, 3600, 0};
  const auto gappy = gen_trajectories(cfg);
  bool found_gap = false;
  for (const auto& seq : gappy.fixes)
    for (std::size_t i = 1; i < seq.fixes.size(); ++i)
      found_gap = found_gap || (seq.fixes[i].t - seq.fixes[i - 1].t > 1800);
  CHECK(found_gap);
}

TEST_CASE("one anchor and zero travel keeps all fixes identical") {
  auto cfg = base_config();
  cfg.trajectories.groups[0].n_anchors = 1;
  const auto traj = gen_trajectories(cfg);
  for (const auto& seq : traj.fixes) {
    for (const auto& fix : seq.fixes) {
      CHECK(fix.p == seq.fixes.front().p);
    }
  }
}

TEST_CASE("true occupancy: static, symmetric, and 30/90 split") {
  const Grid grid{PlanarPoint{0, 0}, 100.0, 4, 1};

  PiecewisePath still;
  still.vertices = {{0, {50, 50}}, {600, {50, 50}}};
  const auto one = true_occupancy(still, grid);
  CHECK(one.proportion(0) == doctest::Approx(1.0));

  PiecewisePath sym;
  sym.vertices = {{0, {50, 50}}, {120, {150, 50}}};
  const auto half = true_occupancy(sym, grid);
  CHECK(half.proportion(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half.proportion(1) == doctest::Approx(0.5).epsilon(1e-12));

  // From x=75 to x=175 in 120 s: the boundary at x=100 is hit at t=30.
  PiecewisePath split;
  split.vertices = {{0, {75, 50}}, {120, {175, 50}}};
  const auto quarters = true_occupancy(split, grid);
  CHECK(quarters.proportion(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(quarters.proportion(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("true occupancy: normalization and reparameterization invariance") {
  PiecewisePath path;
  path.vertices = {{0, {50, 50}},    {3600, {50, 50}},  {3700, {350, 250}},
                   {7300, {350, 250}}, {7400, {50, 150}}, {9000, {50, 150}}};
  const Grid grid{PlanarPoint{0, 0}, 100.0, 6, 6};
  const auto occ = true_occupancy(path, grid);
  double sum = 0;
  for (const auto& [cell, p] : occ.share) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // Uniformly stretching time leaves the occupancy shares unchanged.
  PiecewisePath stretched = path;
  for (auto& v : stretched.vertices) v.t *= 7.5;
  const auto occ2 = true_occupancy(stretched, grid);
  REQUIRE(occ.share.size() == occ2.share.size());
  for (std::size_t i = 0; i < occ.share.size(); ++i) {
    CHECK(occ.share[i].first == occ2.share[i].first);
    CHECK(occ.share[i].second == doctest::Approx(occ2.share[i].second).epsilon(1e-9));
  }
}

TEST_CASE("true occupancy rejects empty paths and counts only in-window time") {
  const Grid grid{PlanarPoint{0, 0}, 100.0, 2, 2};
  PiecewisePath none;
  none.vertices = {{0, {50, 50}}};
  CHECK_THROWS_AS(true_occupancy(none, grid), Error);

  PiecewisePath outside;
  outside.vertices = {{0, {5000, 5000}}, {600, {5000, 5000}}};
  CHECK_THROWS_AS(true_occupancy(outside, grid), Error);

  // Half the time is outside the window and is excluded before normalizing.
  PiecewisePath half_out;
  half_out.vertices = {{0, {50, 50}}, {600, {50, 50}}, {601, {5000, 5000}}, {1201, {5000, 5000}}};
  const auto occ = true_occupancy(half_out, grid);
  CHECK(occ.proportion(0) == doctest::Approx(1.0).epsilon(1e-3));
}
