#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "actex/geometry.hpp"

namespace actex {

// One homestead-year aggregate: residents of the surveillance cohort at this
// location in this period, and how many of them are (imputed or observed)
// positive.
struct HomesteadYear {
  std::int64_t homestead_id = 0;
  PlanarPoint location;
  int period = 0;
  std::int64_t n_total = 0;
  std::int64_t n_positive = 0;
};

struct KernelParams {
  double s_km = 1.165;      // Gaussian standard deviation
  double radius_km = 3.0;   // truncation radius

  void validate() const;
};

inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct PrevalenceField {
  Grid grid;
  int period = 0;
  std::vector<double> values;  // per cell; NaN where the total kernel weight is 0

  double value(CellId id) const {
    if (id < 0 || id >= static_cast<CellId>(values.size())) return missing_value();
    return values[static_cast<std::size_t>(id)];
  }
};

// w = exp(-d^2 / (2 s^2)), d and s in kilometers.
double kernel_weight(double d_km, double s_km);

// Kernel-smoothed per-cell prevalence: for each cell, the ratio of summed
// person-weights of positive residents to summed person-weights of all
// residents over homesteads within the search radius. Homesteads are bucketed
// on a coarse grid so the work per cell is proportional to the homesteads in
// radius; cells are processed in parallel. Summation runs in ascending
// homestead id, which makes the result bit-identical to the serial reference.
PrevalenceField prevalence_field(const Grid& grid, std::vector<HomesteadYear> homesteads,
                                 const KernelParams& params);

// Serial O(cells x homesteads) reference used by tests and the benchmark.
PrevalenceField prevalence_field_reference(const Grid& grid,
                                           std::vector<HomesteadYear> homesteads,
                                           const KernelParams& params);

}  // namespace actex
