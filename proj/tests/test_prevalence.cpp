#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "actex/error.hpp"
#include "actex/prevalence.hpp"
#include "actex/rng.hpp"

using namespace actex;

namespace {

std::vector<HomesteadYear> random_homesteads(RngStream& rng, int n, const Grid& grid) {
  std::vector<HomesteadYear> out;
  for (int i = 0; i < n; ++i) {
    const auto total = static_cast<std::int64_t>(rng.below(9));  // zero-resident homesteads too
    const auto positive =
        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total + 1)));
    out.push_back(HomesteadYear{
        1000 - i,  // inserted in descending id order; computation must sort
        PlanarPoint{grid.origin.x + rng.uniform(-500, grid.n_cols * grid.cell_size + 500),
                    grid.origin.y + rng.uniform(-500, grid.n_rows * grid.cell_size + 500)},
        2019, total, positive});
  }
  return out;
}

bool same_field(const PrevalenceField& a, const PrevalenceField& b) {
  if (a.values.size() != b.values.size()) return false;
  return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("kernel weight values") {
  CHECK(kernel_weight(0.0, 1.165) == 1.0);
  CHECK(kernel_weight(3.0, 1.165) ==
        doctest::Approx(std::exp(-9.0 / (2.0 * 1.165 * 1.165))).epsilon(1e-15));
  CHECK(kernel_weight(3.0, 1.165) == doctest::Approx(0.03632).epsilon(2e-3));
  // Half-weight radius identity.
  CHECK(kernel_weight(1.165 * std::sqrt(2.0 * std::log(2.0)), 1.165) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kernel params validation") {
  const KernelParams zero_s{0.0, 3.0};
  const KernelParams radius_below_s{2.0, 1.0};
  CHECK_THROWS_AS(zero_s.validate(), Error);
  CHECK_THROWS_AS(radius_below_s.validate(), Error);
}

TEST_CASE("single homestead: weights cancel to its prevalence") {
  const Grid grid{PlanarPoint{0, 0}, 100.0, 60, 60};
  const std::vector<HomesteadYear> homesteads{
      HomesteadYear{1, PlanarPoint{1500, 1500}, 2019, 2, 1}};
  const auto field = prevalence_field(grid, homesteads, KernelParams{});
  int defined = 0;
  for (CellId id = 0; id < grid.cell_count(); ++id) {
    const double v = field.value(id);
    if (is_missing(v)) continue;
    ++defined;
    CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(defined > 0);
  // The far corner is beyond the 3 km search radius, hence missing.
  CHECK(is_missing(field.value(grid.cell_count() - 1)));
}

TEST_CASE("two-homestead weighted ratio example") {
  // Cell centroid at 1 km from H1 (1/1 positive) and 2 km from H2 (0/1).
  const Grid grid{PlanarPoint{0, 0}, 100.0, 1, 1};
  const PlanarPoint centroid = grid.centroid(0);
  const std::vector<HomesteadYear> homesteads{
      HomesteadYear{1, PlanarPoint{centroid.x + 1000.0, centroid.y}, 2019, 1, 1},
      HomesteadYear{2, PlanarPoint{centroid.x, centroid.y + 2000.0}, 2019, 1, 0}};
  const auto field = prevalence_field(grid, homesteads, KernelParams{});
  const double w1 = kernel_weight(1.0, 1.165);
  const double w2 = kernel_weight(2.0, 1.165);
  CHECK(field.value(0) == doctest::Approx(w1 / (w1 + w2)).epsilon(1e-15));
  CHECK(field.value(0) == doctest::Approx(0.7511).epsilon(1e-4));
}

TEST_CASE("cells beyond the search radius are missing, zero-count in radius too") {
  const Grid grid{PlanarPoint{0, 0}, 100.0, 80, 1};
  const std::vector<HomesteadYear> homesteads{HomesteadYear{1, PlanarPoint{50, 50}, 2019, 3, 2}};
  const auto field = prevalence_field(grid, homesteads, KernelParams{});
  CHECK_FALSE(is_missing(field.value(0)));
  CHECK_FALSE(is_missing(field.value(29)));  // 2.9 km out
  CHECK(is_missing(field.value(31)));        // 3.1 km out

  // A homestead with no residents carries no kernel weight.
  const std::vector<HomesteadYear> empty_house{HomesteadYear{1, PlanarPoint{50, 50}, 2019, 0, 0}};
  const auto field2 = prevalence_field(grid, empty_house, KernelParams{});
  for (CellId id = 0; id < grid.cell_count(); ++id) CHECK(is_missing(field2.value(id)));
}

TEST_CASE("indexed field equals the serial reference bit for bit") {
  RngStream rng(55);
  for (int trial = 0; trial < 6; ++trial) {
    const Grid grid{PlanarPoint{rng.uniform(-100, 100), rng.uniform(-100, 100)}, 100.0,
                    20 + static_cast<std::int64_t>(rng.below(40)),
                    20 + static_cast<std::int64_t>(rng.below(40))};
    const auto homesteads = random_homesteads(rng, 120, grid);
    const auto fast = prevalence_field(grid, homesteads, KernelParams{});
    const auto brute = prevalence_field_reference(grid, homesteads, KernelParams{});
    CHECK(same_field(fast, brute));
  }
}

TEST_CASE("non-missing values stay within the in-radius prevalence hull") {
  RngStream rng(66);
  const Grid grid{PlanarPoint{0, 0}, 100.0, 40, 40};
  const auto homesteads = random_homesteads(rng, 60, grid);
  const auto field = prevalence_field(grid, homesteads, KernelParams{});
  const double radius_m = KernelParams{}.radius_km * 1000.0;
  for (CellId id = 0; id < grid.cell_count(); id += 7) {
    const double v = field.value(id);
    if (is_missing(v)) continue;
    double lo = 1.0, hi = 0.0;
    for (const auto& h : homesteads) {
      if (h.n_total == 0 || distance_m(grid.centroid(id), h.location) > radius_m) continue;
      const double p = static_cast<double>(h.n_positive) / static_cast<double>(h.n_total);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("translation invariance") {
  RngStream rng(13);
  const Grid grid{PlanarPoint{0, 0}, 100.0, 25, 25};
  auto homesteads = random_homesteads(rng, 40, grid);
  const auto base = prevalence_field(grid, homesteads, KernelParams{});

  const PlanarPoint shift{12345.0, -6789.0};
  Grid moved = grid;
  moved.origin = PlanarPoint{grid.origin.x + shift.x, grid.origin.y + shift.y};
  for (auto& h : homesteads)
    h.location = PlanarPoint{h.location.x + shift.x, h.location.y + shift.y};
  const auto shifted = prevalence_field(moved, homesteads, KernelParams{});
  for (CellId id = 0; id < grid.cell_count(); ++id) {
    const double a = base.value(id);
    const double b = shifted.value(id);
    if (is_missing(a)) {
      CHECK(is_missing(b));
    } else {
      CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
  }
}

TEST_CASE("raising positives at one homestead never lowers any cell") {
  RngStream rng(21);
  const Grid grid{PlanarPoint{0, 0}, 100.0, 20, 20};
  auto homesteads = random_homesteads(rng, 30, grid);
  for (auto& h : homesteads)
    if (h.n_total == 0) h.n_total = 1;  // keep every homestead active
  const auto before = prevalence_field(grid, homesteads, KernelParams{});
  for (auto& h : homesteads) {
    if (h.n_positive < h.n_total) {
      ++h.n_positive;
      break;
    }
  }
  const auto after = prevalence_field(grid, homesteads, KernelParams{});
  for (CellId id = 0; id < grid.cell_count(); ++id) {
    if (is_missing(before.value(id))) continue;
    CHECK(after.value(id) >= before.value(id) - 1e-12);
  }
}

TEST_CASE("input validation") {
  const Grid grid{PlanarPoint{0, 0}, 100.0, 2, 2};
  CHECK_THROWS_AS(
      prevalence_field(grid, {HomesteadYear{1, PlanarPoint{0, 0}, 2019, 1, 2}}, KernelParams{}),
      Error);
  CHECK_THROWS_AS(prevalence_field(grid,
                                   {HomesteadYear{1, PlanarPoint{0, 0}, 2019, 1, 0},
                                    HomesteadYear{2, PlanarPoint{0, 0}, 2020, 1, 0}},
                                   KernelParams{}),
                  Error);
}
