#include "actex/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "actex/error.hpp"
#include "actex/rng.hpp"

namespace actex {

namespace {

double beta_cont_fraction(double x, double a, double b) {
  // Lentz's algorithm for the incomplete beta continued fraction.
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_fraction(x, a, b) / a;
  return 1.0 - front * beta_cont_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(x, df / 2.0, 0.5);
  return t >= 0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    raise(ErrorKind::invalid_argument, "paired t-test requires equal-length sequences");
  const std::size_t n = x.size();
  if (n < 2) raise(ErrorKind::insufficient_data, "paired t-test requires n >= 2");
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
  mean /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (x[i] - y[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0)
    raise(ErrorKind::degenerate_variance, "all paired differences are identical");
  TTestResult res;
  res.mean_diff = mean;
  res.df = static_cast<double>(n - 1);
  res.t = mean / std::sqrt(var / static_cast<double>(n));
  // Two-sided p; the identity with the incomplete beta avoids cancellation.
  res.p = regularized_incomplete_beta(res.df / (res.df + res.t * res.t), res.df / 2.0, 0.5);
  return res;
}

double percentile_type7(std::vector<double> values, double pct) {
  if (values.empty()) raise(ErrorKind::insufficient_data, "percentile of empty sequence");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

const char* risk_group_name(RiskGroup g) {
  switch (g) {
    case RiskGroup::low: return "low";
    case RiskGroup::high: return "high";
    case RiskGroup::high_local: return "high_local";
    case RiskGroup::high_external: return "high_external";
    case RiskGroup::unassigned: return "unassigned";
  }
  return "unassigned";
}

std::vector<RiskAssignment> risk_stratify(std::span<const RiskInput> profiles, double p_low,
                                          double p_high) {
  if (profiles.size() < 5)
    raise(ErrorKind::insufficient_data, "risk stratification requires at least 5 participants");
  if (!(p_low < p_high))
    raise(ErrorKind::invalid_argument, "low percentile must be below high percentile");
  std::vector<double> e_in, f_out;
  e_in.reserve(profiles.size());
  f_out.reserve(profiles.size());
  for (const auto& p : profiles) {
    e_in.push_back(p.e_in);
    f_out.push_back(p.fraction_out);
  }
  const double e_lo = percentile_type7(e_in, p_low);
  const double e_hi = percentile_type7(e_in, p_high);
  const double f_lo = percentile_type7(f_out, p_low);
  const double f_hi = percentile_type7(f_out, p_high);

  std::vector<RiskAssignment> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    RiskGroup g = RiskGroup::unassigned;
    const bool e_above = p.e_in > e_hi;
    const bool f_above = p.fraction_out > f_hi;
    if (p.e_in < e_lo && p.fraction_out < f_lo)
      g = RiskGroup::low;
    else if (e_above && f_above)
      g = RiskGroup::high;
    else if (e_above)
      g = RiskGroup::high_local;
    else if (f_above)
      g = RiskGroup::high_external;
    out.push_back(RiskAssignment{p.person_id, g});
  }
  return out;
}

namespace {

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct KmeansRun {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double objective = 0;
};

KmeansRun lloyd(const std::vector<std::vector<double>>& pts, int k, std::uint64_t sub_seed,
                int max_iterations, bool random_init) {
  const std::size_t n = pts.size();
  const std::size_t dim = pts[0].size();
  RngStream rng(sub_seed);

  // First restart: farthest-point initialization from a random seed point.
  // Later restarts draw k distinct points at random so the runs explore
  // different basins.
  std::vector<std::vector<double>> centroids;
  if (random_init) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int c = 0; c < k; ++c) {
      const auto j = static_cast<std::size_t>(c) +
                     static_cast<std::size_t>(rng.below(n - static_cast<std::size_t>(c)));
      std::swap(idx[static_cast<std::size_t>(c)], idx[j]);
      centroids.push_back(pts[idx[static_cast<std::size_t>(c)]]);
    }
  } else {
    centroids.push_back(pts[rng.below(n)]);
    while (static_cast<int>(centroids.size()) < k) {
      std::size_t far_idx = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : centroids) d = std::min(d, sq_distance(pts[i], c));
        if (d > far_d) {
          far_d = d;
          far_idx = i;
        }
      }
      centroids.push_back(pts[far_idx]);
    }
  }

  std::vector<int> assignment(n, -1);
  auto assign_all = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_distance(pts[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_distance(pts[i], centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    return changed;
  };
  auto objective_of = [&]() {
    double obj = 0;
    for (std::size_t i = 0; i < n; ++i)
      obj += sq_distance(pts[i], centroids[static_cast<std::size_t>(assignment[i])]);
    return obj;
  };

  assign_all();
  double prev_obj = objective_of();
  for (int it = 0; it < max_iterations; ++it) {
    // Update step.
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(dim, 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += pts[i][d];
    }
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (counts[ci] == 0) {
        // Re-seed an empty cluster at the point farthest from its previous
        // centroid (ties -> lowest index).
        std::size_t far_idx = 0;
        double far_d = -1;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_distance(pts[i], centroids[ci]);
          if (d > far_d) {
            far_d = d;
            far_idx = i;
          }
        }
        centroids[ci] = pts[far_idx];
      } else {
        for (std::size_t d = 0; d < dim; ++d)
          centroids[ci][d] = sums[ci][d] / static_cast<double>(counts[ci]);
      }
    }
    const bool changed = assign_all();
    const double obj = objective_of();
    if (obj > prev_obj + 1e-9 * (1.0 + std::abs(prev_obj)))
      raise(ErrorKind::degenerate_input, "k-means objective increased");
    prev_obj = obj;
    if (!changed) break;
  }

  // Deterministic single-point-move polish: relocate one point at a time
  // whenever that strictly lowers the objective. This escapes the shallow
  // local minima Lloyd converges to on small inputs.
  if (k > 1) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += pts[i][d];
    }
    auto mean_of = [&](std::size_t c) {
      std::vector<double> m(dim);
      for (std::size_t d = 0; d < dim; ++d) m[d] = sums[c][d] / static_cast<double>(counts[c]);
      return m;
    };
    int moves = 0;
    bool improved = true;
    while (improved && moves < 10000) {
      improved = false;
      for (std::size_t i = 0; i < n; ++i) {
        const auto from = static_cast<std::size_t>(assignment[i]);
        if (counts[from] <= 1) continue;  // never empty a cluster
        const double na = static_cast<double>(counts[from]);
        const double gain =
            na / (na - 1.0) * sq_distance(pts[i], mean_of(from));
        for (int c = 0; c < k; ++c) {
          const auto to = static_cast<std::size_t>(c);
          if (to == from) continue;
          const double nb = static_cast<double>(counts[to]);
          const double cost = nb / (nb + 1.0) * sq_distance(pts[i], mean_of(to));
          if (cost < gain - 1e-12 * (1.0 + gain)) {
            --counts[from];
            ++counts[to];
            for (std::size_t d = 0; d < dim; ++d) {
              sums[from][d] -= pts[i][d];
              sums[to][d] += pts[i][d];
            }
            assignment[i] = c;
            improved = true;
            ++moves;
            break;
          }
        }
      }
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centroids[static_cast<std::size_t>(c)] = mean_of(static_cast<std::size_t>(c));
    prev_obj = objective_of();
  }
  return KmeansRun{std::move(assignment), std::move(centroids), prev_obj};
}

}  // namespace

ClusterResult cluster_deviations(std::span<const DeviationCurve> curves, int k,
                                 std::uint64_t seed, int restarts, int max_iterations) {
  if (k < 1) raise(ErrorKind::invalid_argument, "k must be >= 1");
  if (static_cast<int>(curves.size()) < k)
    raise(ErrorKind::insufficient_data, "fewer curves than clusters");
  if (restarts < 1) raise(ErrorKind::invalid_argument, "restarts must be >= 1");

  const std::size_t dim = curves.front().values.size();
  std::vector<std::vector<double>> pts;
  pts.reserve(curves.size());
  for (const auto& c : curves) {
    if (c.values.size() != dim)
      raise(ErrorKind::invalid_argument, "deviation curves of unequal length");
    for (const double v : c.values)
      if (!std::isfinite(v))
        raise(ErrorKind::degenerate_input, "person " + c.person_id + ": non-finite deviation");
    pts.push_back(c.values);
  }
  {
    auto distinct = pts;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < k)
      raise(ErrorKind::degenerate_input, "fewer distinct curves than clusters");
  }

  std::vector<KmeansRun> runs(static_cast<std::size_t>(restarts));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < restarts; ++r)
    runs[static_cast<std::size_t>(r)] = lloyd(
        pts, k, derive_sub_seed(seed, static_cast<std::uint64_t>(r)), max_iterations, r > 0);

  // Lowest objective wins; ties go to the earliest restart.
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].objective < runs[best].objective) best = r;
  KmeansRun& run = runs[best];

  // Order centroids by decreasing mean deviation and label them.
  std::vector<std::size_t> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> means(static_cast<std::size_t>(k), 0);
  for (int c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    for (const double v : run.centroids[ci]) means[ci] += v;
    means[ci] /= static_cast<double>(dim);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (means[a] != means[b]) return means[a] > means[b];
    return a < b;
  });

  ClusterResult res;
  res.seed = seed;
  res.objective = run.objective;
  std::vector<std::string> label_of(static_cast<std::size_t>(k));
  for (int rank = 0; rank < k; ++rank) {
    std::string label = "stable";
    if (k > 1 && rank == 0) label = "increase";
    if (k > 1 && rank == k - 1) label = "decrease";
    label_of[order[static_cast<std::size_t>(rank)]] = label;
    res.centroids.push_back(run.centroids[order[static_cast<std::size_t>(rank)]]);
    res.labels.push_back(label);
  }
  for (std::size_t i = 0; i < curves.size(); ++i)
    res.assignments.emplace_back(curves[i].person_id,
                                 label_of[static_cast<std::size_t>(run.assignment[i])]);
  return res;
}

std::vector<CoverageCurve> coverage_curves(
    const std::map<std::string, std::vector<const ActivityDistribution*>>& groups,
    std::span<const double> gammas, const std::optional<ResampleSpec>& resample, PoolMode mode) {
  for (const double g : gammas)
    if (!(g > 0 && g <= 100)) raise(ErrorKind::invalid_argument, "gamma must be in (0, 100]");

  auto curve_of = [&](const ActivityDistribution& dist) {
    std::vector<double> out;
    out.reserve(gammas.size());
    for (const double g : gammas)
      out.push_back(static_cast<double>(activity_space(dist, g).cells.size()));
    return out;
  };

  std::vector<CoverageCurve> result;
  std::size_t group_index = 0;
  for (const auto& [name, members] : groups) {
    if (members.empty()) raise(ErrorKind::insufficient_data, "group " + name + " is empty");
    CoverageCurve curve;
    curve.group = name;
    curve.gammas.assign(gammas.begin(), gammas.end());

    curve.mean_individual.assign(gammas.size(), 0.0);
    for (const ActivityDistribution* m : members) {
      const auto c = curve_of(*m);
      for (std::size_t i = 0; i < c.size(); ++i) curve.mean_individual[i] += c[i];
    }
    for (auto& v : curve.mean_individual) v /= static_cast<double>(members.size());

    const bool do_resample =
        resample && static_cast<std::int64_t>(members.size()) > resample->target_size;
    if (resample && resample->target_size > static_cast<std::int64_t>(members.size()))
      raise(ErrorKind::invalid_resample,
            "group " + name + ": resample target exceeds group size");
    if (do_resample) {
      const auto reps = static_cast<std::size_t>(resample->repetitions);
      std::vector<std::vector<double>> rep_curves(reps);
#pragma omp parallel for schedule(static)
      for (std::int64_t rep = 0; rep < static_cast<std::int64_t>(reps); ++rep) {
        RngStream rng(derive_sub_seed(resample->seed, group_index,
                                      static_cast<std::uint64_t>(rep)));
        // Partial Fisher-Yates draw without replacement, then ascending order
        // so pooling sums deterministically.
        std::vector<std::size_t> idx(members.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::int64_t i = 0; i < resample->target_size; ++i) {
          const auto j = i + static_cast<std::int64_t>(
                                 rng.below(static_cast<std::uint64_t>(idx.size() - static_cast<std::size_t>(i))));
          std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(resample->target_size));
        std::sort(idx.begin(), idx.end());
        std::vector<const ActivityDistribution*> chosen;
        chosen.reserve(idx.size());
        for (const std::size_t i : idx) chosen.push_back(members[i]);
        rep_curves[static_cast<std::size_t>(rep)] =
            curve_of(pool(chosen, mode, "resample").dist);
      }
      curve.collective.assign(gammas.size(), 0.0);
      curve.q1.resize(gammas.size());
      curve.q3.resize(gammas.size());
      for (std::size_t g = 0; g < gammas.size(); ++g) {
        std::vector<double> vals(reps);
        for (std::size_t r = 0; r < reps; ++r) vals[r] = rep_curves[r][g];
        for (const double v : vals) curve.collective[g] += v;
        curve.collective[g] /= static_cast<double>(reps);
        curve.q1[g] = percentile_type7(vals, 25);
        curve.q3[g] = percentile_type7(vals, 75);
      }
    } else {
      curve.collective = curve_of(pool(members, mode, name).dist);
      curve.q1 = curve.collective;
      curve.q3 = curve.collective;
    }
    result.push_back(std::move(curve));
    ++group_index;
  }
  return result;
}

const char* overlap_category_name(OverlapCategory c) {
  switch (c) {
    case OverlapCategory::women_only: return "women_only";
    case OverlapCategory::men_only: return "men_only";
    case OverlapCategory::both: return "both";
  }
  return "both";
}

std::vector<std::pair<std::int64_t, OverlapCategory>> overlap_map(const ActivitySpace& women,
                                                                  const ActivitySpace& men) {
  if (women.gamma != men.gamma)
    raise(ErrorKind::level_mismatch, "overlap of activity spaces at different levels");
  std::vector<std::int64_t> w(women.cells), m(men.cells);
  std::sort(w.begin(), w.end());
  std::sort(m.begin(), m.end());
  std::vector<std::pair<std::int64_t, OverlapCategory>> out;
  std::size_t i = 0, j = 0;
  while (i < w.size() || j < m.size()) {
    if (j == m.size() || (i < w.size() && w[i] < m[j])) {
      out.emplace_back(w[i++], OverlapCategory::women_only);
    } else if (i == w.size() || m[j] < w[i]) {
      out.emplace_back(m[j++], OverlapCategory::men_only);
    } else {
      out.emplace_back(w[i], OverlapCategory::both);
      ++i;
      ++j;
    }
  }
  return out;
}

std::vector<double> log_activity_export(const ActivityDistribution& dist, const Grid& grid,
                                        double epsilon) {
  std::vector<double> out(static_cast<std::size_t>(grid.cell_count()));
  for (CellId id = 0; id < grid.cell_count(); ++id)
    out[static_cast<std::size_t>(id)] = std::log(dist.proportion(id) + epsilon);
  return out;
}

}  // namespace actex
