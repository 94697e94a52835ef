#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "actex/error.hpp"
#include "actex/exposure.hpp"
#include "actex/rng.hpp"

using namespace actex;

namespace {

ActivityDistribution dist_of(std::vector<std::pair<std::int64_t, double>> share,
                             double seconds = 3600) {
  ActivityDistribution d;
  d.id = "p";
  d.share = std::move(share);
  d.total_seconds = seconds;
  return d;
}

PrevalenceField field_of(std::vector<double> values) {
  PrevalenceField f;
  f.values = std::move(values);
  return f;
}

}  // namespace

TEST_CASE("exposure_in: weighted mean over defined cells") {
  const auto dist = dist_of({{0, 0.5}, {1, 0.5}});
  CHECK(exposure_in(dist, field_of({0.2, 0.4})) == doctest::Approx(0.3).epsilon(1e-12));

  const auto solo = dist_of({{1, 1.0}});
  CHECK(exposure_in(solo, field_of({0.9, 0.35})) == doctest::Approx(0.35));

  // All visited cells missing -> missing.
  CHECK(is_missing(exposure_in(dist, field_of({missing_value(), missing_value()}))));

  // Missing cells are renormalized away, not counted as zero.
  const auto skewed = dist_of({{0, 0.75}, {1, 0.25}});
  CHECK(exposure_in(skewed, field_of({missing_value(), 0.4})) == doctest::Approx(0.4));
}

TEST_CASE("exposure_out: duration-weighted district mean") {
  DistrictPrevalence dp;
  dp.values = {{1, 0.25}, {2, 0.4}};
  {
    const std::pair<std::int64_t, std::int64_t> durations[] = {{1, 2400}};
    CHECK(exposure_out(durations, dp) == doctest::Approx(0.25));
  }
  {
    const std::pair<std::int64_t, std::int64_t> durations[] = {{1, 1}, {2, 3}};
    DistrictPrevalence dp2;
    dp2.values = {{1, 0.2}, {2, 0.4}};
    CHECK(exposure_out(durations, dp2) == doctest::Approx(0.35));
  }
  CHECK(is_missing(exposure_out({}, dp)));
  {
    const std::pair<std::int64_t, std::int64_t> durations[] = {{7, 600}};
    CHECK_THROWS_AS(exposure_out(durations, dp), Error);
  }
}

TEST_CASE("exposure_overall combines the two sides") {
  CHECK(exposure_overall(0.3, 0.2, 0.75, 0.25) == doctest::Approx(0.275).epsilon(1e-12));
  CHECK(exposure_overall(0.3, missing_value(), 1.0, 0.0) == doctest::Approx(0.3));
  CHECK(exposure_overall(missing_value(), 0.2, 0.0, 1.0) == doctest::Approx(0.2));
  CHECK(is_missing(exposure_overall(0.3, missing_value(), 0.75, 0.25)));
  CHECK(is_missing(exposure_overall(0.3, 0.2, missing_value(), missing_value())));
}

TEST_CASE("exposure_home over the level-50 space") {
  const auto dist = dist_of({{1, 0.4}, {2, 0.2}, {3, 0.4}});
  // Home cells {1, 2}; value = (0.4*0.3 + 0.2*0.6) / 0.6.
  ActivitySpace home{50, {1, 2}, 0.6};
  const auto field = field_of({0.0, 0.3, 0.6, 0.9});
  CHECK(exposure_home(dist, home, field) == doctest::Approx(0.4).epsilon(1e-12));

  ActivitySpace single{50, {3}, 0.4};
  CHECK(exposure_home(dist, single, field) == doctest::Approx(0.9));

  const auto holes = field_of({0.0, missing_value(), missing_value(), 0.9});
  CHECK(is_missing(exposure_home(dist, home, holes)));
}

TEST_CASE("uniform prevalence propagates to every measure") {
  const double p = 0.31;
  const auto dist = dist_of({{0, 0.2}, {1, 0.5}, {2, 0.3}});
  const auto field = field_of({p, p, p});
  DistrictPrevalence dp;
  dp.values = {{1, p}, {2, p}};
  const std::pair<std::int64_t, std::int64_t> durations[] = {{1, 500}, {2, 700}};

  const double e_in = exposure_in(dist, field);
  const double e_out = exposure_out(durations, dp);
  const double f_in = 0.4, f_out = 0.6;
  const double e_overall = exposure_overall(e_in, e_out, f_in, f_out);
  const double e_home = exposure_home(dist, activity_space(dist, 50), field);
  CHECK(e_in == doctest::Approx(p).epsilon(1e-12));
  CHECK(e_out == doctest::Approx(p).epsilon(1e-12));
  CHECK(e_overall == doctest::Approx(p).epsilon(1e-12));
  CHECK(e_home == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("exposures stay in the convex hull of their inputs; scaling is linear") {
  RngStream rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<std::pair<std::int64_t, double>> share;
    std::vector<double> values(n);
    double sum = 0;
    double lo = 1, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = rng.next_double() + 1e-3;
      share.emplace_back(static_cast<std::int64_t>(i), w);
      sum += w;
      values[i] = rng.next_double();
      lo = std::min(lo, values[i]);
      hi = std::max(hi, values[i]);
    }
    for (auto& [unit, w] : share) w /= sum;
    const auto dist = dist_of(share);
    const auto field = field_of(values);
    const double e = exposure_in(dist, field);
    CHECK(e >= lo - 1e-12);
    CHECK(e <= hi + 1e-12);

    const double c = 0.37;
    auto scaled_values = values;
    for (auto& v : scaled_values) v *= c;
    const double e_scaled = exposure_in(dist, field_of(scaled_values));
    CHECK(e_scaled == doctest::Approx(c * e).epsilon(1e-12));
  }
}

TEST_CASE("home classification prefers the largest time share") {
  // 1000 s in the best cell vs a district with 30000 s.
  const auto dist = dist_of({{5, 0.5}, {6, 0.3}, {7, 0.2}}, 2000);
  {
    const std::pair<std::int64_t, std::int64_t> districts[] = {{1, 30000}};
    const auto home = classify_home(dist, districts);
    CHECK(home.defined);
    CHECK_FALSE(home.inside);
    CHECK(home.home_district == 1);
  }
  {
    const std::pair<std::int64_t, std::int64_t> districts[] = {{1, 900}};
    const auto home = classify_home(dist, districts);
    CHECK(home.defined);
    CHECK(home.inside);
  }
  {
    const auto home = classify_home(dist, {});
    CHECK(home.defined);
    CHECK(home.inside);
  }
  {
    const auto home = classify_home(ActivityDistribution{}, {});
    CHECK_FALSE(home.defined);
  }
  {
    // Largest district wins over smaller districts.
    const std::pair<std::int64_t, std::int64_t> districts[] = {{3, 5000}, {9, 90000}};
    const auto home = classify_home(ActivityDistribution{}, districts);
    CHECK(home.defined);
    CHECK_FALSE(home.inside);
    CHECK(home.home_district == 9);
  }
}

TEST_CASE("district prevalence lookups") {
  DistrictPrevalence dp;
  dp.values = {{2, 0.1}, {5, 0.3}};
  CHECK(dp.lookup(5) == doctest::Approx(0.3));
  CHECK_THROWS_AS(dp.lookup(4), Error);
}
