#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actex/activity.hpp"

namespace actex {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

// Pr(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 1;          // two-sided
  double mean_diff = 0;  // mean(x - y)
};

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

// Linear interpolation between order statistics (the common "type 7" rule).
double percentile_type7(std::vector<double> values, double pct);

enum class RiskGroup { low, high, high_local, high_external, unassigned };
const char* risk_group_name(RiskGroup g);

struct RiskInput {
  std::string person_id;
  double e_in = 0;
  double fraction_out = 0;
};

struct RiskAssignment {
  std::string person_id;
  RiskGroup group = RiskGroup::unassigned;
};

// Quadrants with strict inequalities: low when both variables fall below the
// low percentile, high when both exceed the high percentile, high_local /
// high_external when only e_in / only fraction_out exceeds it.
std::vector<RiskAssignment> risk_stratify(std::span<const RiskInput> profiles,
                                          double p_low = 40, double p_high = 60);

// Exposure deviation from home across activity-space levels 50..95.
struct DeviationCurve {
  std::string person_id;
  std::vector<double> values;
};

struct ClusterResult {
  std::vector<std::pair<std::string, std::string>> assignments;  // person -> label
  std::vector<std::vector<double>> centroids;                    // by descending mean
  std::vector<std::string> labels;                               // label per centroid
  double objective = 0;
  std::uint64_t seed = 0;
};

// Seeded Lloyd iterations with farthest-point initialization, best of
// `restarts` runs; centroid labels are assigned by mean deviation
// (max -> increase, min -> decrease) so they do not depend on the seed.
ClusterResult cluster_deviations(std::span<const DeviationCurve> curves, int k,
                                 std::uint64_t seed, int restarts = 10, int max_iterations = 100);

struct ResampleSpec {
  std::int64_t target_size = 0;
  int repetitions = 100;
  std::uint64_t seed = 0;
};

struct CoverageCurve {
  std::string group;
  std::vector<double> gammas;
  std::vector<double> collective;       // |AS_gamma| of the pooled distribution
  std::vector<double> mean_individual;  // mean over member |AS_gamma|
  std::vector<double> q1, q3;           // interquartile band of the collective curve
};

// Per-group activity-space size curves. With a resample spec, groups larger
// than the target are subsampled without replacement, repeated, and averaged.
std::vector<CoverageCurve> coverage_curves(
    const std::map<std::string, std::vector<const ActivityDistribution*>>& groups,
    std::span<const double> gammas, const std::optional<ResampleSpec>& resample,
    PoolMode mode = PoolMode::duration_weighted);

enum class OverlapCategory { women_only, men_only, both };
const char* overlap_category_name(OverlapCategory c);

// Set algebra over two same-level spaces, ascending cell id.
std::vector<std::pair<std::int64_t, OverlapCategory>> overlap_map(const ActivitySpace& women,
                                                                  const ActivitySpace& men);

// log(share + epsilon) for every grid cell, for plotting.
std::vector<double> log_activity_export(const ActivityDistribution& dist, const Grid& grid,
                                        double epsilon = 1e-15);

}  // namespace actex
