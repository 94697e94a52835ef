#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actex/activity.hpp"
#include "actex/cohort.hpp"
#include "actex/exposure.hpp"
#include "actex/geometry.hpp"
#include "actex/imputation.hpp"
#include "actex/prevalence.hpp"
#include "actex/synth.hpp"

namespace actex {

// Pipeline configuration, loaded from a single JSON file. Every constant of
// the methodology (gap threshold, kernel s and radius, home level, risk
// percentiles, log offset) is a key with its published default. Unknown keys
// are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = leave the OpenMP default
  bool percent_units = false;
  int replicates = 1;
  int status_replicate = 1;
  std::optional<int> prevalence_period;

  bool has_grid = false;
  Grid grid;
  Projection projection;

  KernelParams kernel;

  std::int64_t gap_seconds = 1800;
  std::vector<double> gammas;  // default 50..95 step 1, plus 100
  PoolMode pooling = PoolMode::duration_weighted;
  double home_gamma = 50;

  double risk_low_percentile = 40;
  double risk_high_percentile = 60;

  int cluster_k = 3;
  int cluster_restarts = 10;
  int cluster_max_iterations = 100;

  bool coverage_balance = true;
  int coverage_repetitions = 100;

  std::vector<double> overlap_gammas{65, 95, 100};
  std::vector<std::string> logmap_groups{"all"};
  double plot_epsilon = 1e-15;

  std::map<std::string, std::string> paths;  // named input/output locations
  std::vector<std::string> stages;           // empty = all applicable
  std::optional<SynthConfig> synth;

  std::string canonical_json;  // for the manifest config hash

  std::string path(const std::string& name) const;  // throws config error if absent
  std::string out_dir() const;
  void require_grid() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig default_pipeline_config();

// "50:95:1,100" -> {50, 51, ..., 95, 100}
std::vector<double> parse_gammas(const std::string& spec);

struct StageResult {
  std::vector<std::string> outputs;
  std::int64_t rows = 0;
  std::int64_t warnings = 0;
};

struct StageStats {
  std::string name;
  std::int64_t rows = 0;
  std::int64_t warnings = 0;
  double wall_ms = 0;
};

struct RunManifest {
  std::string config_hash;
  int threads = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  std::vector<StageStats> stages;

  void write(const std::string& path) const;
};

// --- ingestion -------------------------------------------------------------

std::vector<SurveillanceRecord> load_surveillance_records(const std::string& path);
std::vector<FixSequence> load_fixes(const std::string& path, const Projection& proj);
PrevalenceField load_prevalence_csv(const std::string& path, bool percent_units);

// --- stages ----------------------------------------------------------------

// what: "all", "cohort", or "trajectories"
StageResult stage_synth(const PipelineConfig& cfg, const std::string& out_dir,
                        const std::string& what = "all");
StageResult stage_impute(const PipelineConfig& cfg, const std::string& tests_path,
                         const std::string& rates_path, const std::string& out_dir);
StageResult stage_prevalence(const PipelineConfig& cfg, const std::string& homesteads_path,
                             const std::string& residents_path, const std::string& status_path,
                             int period, const std::string& out_path);
StageResult stage_activity(const PipelineConfig& cfg, const std::string& fixes_path,
                           const std::string& regions_path, const std::string& out_dir);
StageResult stage_exposure(const PipelineConfig& cfg, const std::string& activity_dir,
                           const std::string& prevalence_path,
                           const std::string& district_prevalence_path,
                           const std::string& out_dir);

StageResult analyze_risk(const PipelineConfig& cfg, const std::string& exposure_path,
                         const std::string& out_path);
StageResult analyze_cluster(const PipelineConfig& cfg, const std::string& deviations_path,
                            const std::string& out_path);
StageResult analyze_coverage(const PipelineConfig& cfg, const std::string& activity_dir,
                             const std::string& participants_path, const std::string& out_path);
StageResult analyze_overlap(const PipelineConfig& cfg, const std::string& activity_dir,
                            const std::string& participants_path, double gamma,
                            const std::string& out_path);
StageResult analyze_design(const PipelineConfig& cfg, const std::string& activity_dir,
                           const std::string& participants_path, const std::string& out_path);
StageResult analyze_logmap(const PipelineConfig& cfg, const std::string& activity_dir,
                           const std::string& participants_path, const std::string& group,
                           const std::string& out_path);

// Full pipeline in dependency order; emits out_dir/manifest.json.
RunManifest run_pipeline(const PipelineConfig& cfg);

struct Finding {
  std::string file;
  std::int64_t row = 0;  // 0 = file-level finding
  std::string column;
  std::string message;
};

// Schema/type/range report over the configured inputs, without computing.
std::vector<Finding> validate_inputs(const PipelineConfig& cfg);

}  // namespace actex
