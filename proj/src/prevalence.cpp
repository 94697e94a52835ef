#include "actex/prevalence.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <omp.h>

#include "actex/error.hpp"

namespace actex {

void KernelParams::validate() const {
  if (!(s_km > 0)) raise(ErrorKind::invalid_argument, "kernel s must be > 0");
  if (!(radius_km >= s_km))
    raise(ErrorKind::invalid_argument, "kernel search radius must be >= s");
}

double kernel_weight(double d_km, double s_km) {
  return std::exp(-(d_km * d_km) / (2.0 * s_km * s_km));
}

namespace {

void prepare(const Grid& grid, std::vector<HomesteadYear>& homesteads,
             const KernelParams& params) {
  grid.validate();
  params.validate();
  std::stable_sort(homesteads.begin(), homesteads.end(),
                   [](const HomesteadYear& a, const HomesteadYear& b) {
                     return a.homestead_id < b.homestead_id;
                   });
  for (std::size_t i = 0; i < homesteads.size(); ++i) {
    const auto& h = homesteads[i];
    if (h.n_positive < 0 || h.n_total < 0 || h.n_positive > h.n_total)
      raise(ErrorKind::invalid_argument,
            "homestead " + std::to_string(h.homestead_id) + ": counts must satisfy 0 <= positive <= total");
    if (!std::isfinite(h.location.x) || !std::isfinite(h.location.y))
      raise(ErrorKind::invalid_coordinate,
            "homestead " + std::to_string(h.homestead_id) + ": non-finite location");
    if (i > 0 && h.period != homesteads[i - 1].period)
      raise(ErrorKind::invalid_argument, "homesteads must all share one period");
  }
}

// Shared per-cell accumulation; the candidate list must be in ascending
// homestead order for reproducible summation.
double cell_value(PlanarPoint centroid, const std::vector<HomesteadYear>& homesteads,
                  const std::size_t* candidates, std::size_t n_candidates,
                  const KernelParams& params) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < n_candidates; ++k) {
    const HomesteadYear& h = homesteads[candidates[k]];
    const double d_km = distance_m(centroid, h.location) / 1000.0;
    if (d_km > params.radius_km) continue;
    const double w = kernel_weight(d_km, params.s_km);
    num += w * static_cast<double>(h.n_positive);
    den += w * static_cast<double>(h.n_total);
  }
  return den > 0 ? num / den : missing_value();
}

}  // namespace

PrevalenceField prevalence_field_reference(const Grid& grid,
                                           std::vector<HomesteadYear> homesteads,
                                           const KernelParams& params) {
  prepare(grid, homesteads, params);
  std::vector<std::size_t> all(homesteads.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  PrevalenceField field{grid, homesteads.empty() ? 0 : homesteads.front().period,
                        std::vector<double>(static_cast<std::size_t>(grid.cell_count()))};
  for (CellId id = 0; id < grid.cell_count(); ++id) {
    field.values[static_cast<std::size_t>(id)] =
        cell_value(grid.centroid(id), homesteads, all.data(), all.size(), params);
  }
  return field;
}

PrevalenceField prevalence_field(const Grid& grid, std::vector<HomesteadYear> homesteads,
                                 const KernelParams& params) {
  prepare(grid, homesteads, params);

  // Bucket homesteads on a radius-sized grid: every homestead within reach of
  // a centroid lies in the 3x3 bucket neighborhood. Buckets keep ascending
  // index order because homesteads are already sorted.
  const double bucket = params.radius_km * 1000.0;
  struct Key {
    std::int64_t bx, by;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.bx) * 0x9E3779B97F4A7C15ULL;
      h ^= static_cast<std::uint64_t>(k.by) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> buckets;
  buckets.reserve(homesteads.size());
  auto key_of = [&](PlanarPoint p) {
    // Clamped so extreme coordinates cannot overflow the integer cast.
    auto idx = [&](double v) {
      return static_cast<std::int64_t>(std::clamp(std::floor(v / bucket), -9e15, 9e15));
    };
    return Key{idx(p.x), idx(p.y)};
  };
  for (std::size_t i = 0; i < homesteads.size(); ++i)
    buckets[key_of(homesteads[i].location)].push_back(i);

  PrevalenceField field{grid, homesteads.empty() ? 0 : homesteads.front().period,
                        std::vector<double>(static_cast<std::size_t>(grid.cell_count()))};
  const std::int64_t n_cells = grid.cell_count();

#pragma omp parallel
  {
    std::vector<std::size_t> candidates;
#pragma omp for schedule(static)
    for (std::int64_t id = 0; id < n_cells; ++id) {
      const PlanarPoint c = grid.centroid(id);
      const Key center = key_of(c);
      candidates.clear();
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const auto it = buckets.find(Key{center.bx + dx, center.by + dy});
          if (it == buckets.end()) continue;
          candidates.insert(candidates.end(), it->second.begin(), it->second.end());
        }
      }
      std::sort(candidates.begin(), candidates.end());
      field.values[static_cast<std::size_t>(id)] =
          cell_value(c, homesteads, candidates.data(), candidates.size(), params);
    }
  }
  return field;
}

}  // namespace actex
