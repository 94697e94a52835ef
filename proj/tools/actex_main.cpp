#include <cstdio>
#include <iostream>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "actex/csv.hpp"
#include "actex/error.hpp"
#include "actex/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCompute = 3;

struct GlobalOptions {
  std::string config_path;
  std::string grid_config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool percent = false;
};

actex::PipelineConfig make_config(const GlobalOptions& g) {
  actex::PipelineConfig cfg = actex::default_pipeline_config();
  const std::string& path = !g.config_path.empty() ? g.config_path : g.grid_config_path;
  if (!path.empty()) cfg = actex::load_pipeline_config(path);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.percent) cfg.percent_units = true;
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

void override_path(actex::PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (!value.empty()) cfg.paths[key] = value;
}

void print_stage_result(const std::string& name, const actex::StageResult& res) {
  std::printf("%s: %lld rows, %lld warnings\n", name.c_str(),
              static_cast<long long>(res.rows), static_cast<long long>(res.warnings));
  for (const auto& path : res.outputs) std::printf("  wrote %s\n", path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPS activity-space and contextual-exposure toolkit"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config JSON");
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed (overrides config)");
  app.add_option("--threads", g.threads, "OpenMP thread count (overrides config)");
  app.add_flag("--percent", g.percent, "Read/write prevalence-like values as percentages");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic inputs with known ground truth");
  std::string synth_what = "all";
  std::string synth_out = "synth";
  synth->add_option("what", synth_what, "all | cohort | trajectories")
      ->check(CLI::IsMember({"all", "cohort", "trajectories"}));
  synth->add_option("--out-dir", synth_out, "Output directory");

  // impute
  auto* impute = app.add_subcommand("impute", "Impute per-period HIV status for the cohort");
  std::string impute_tests, impute_rates, impute_out = "out";
  int impute_replicates = 0;
  impute->add_option("--tests", impute_tests, "tests.csv");
  impute->add_option("--rates", impute_rates, "rates.csv");
  impute->add_option("--replicates", impute_replicates, "Number of imputed datasets");
  impute->add_option("--out-dir", impute_out, "Output directory");

  // prevalence
  auto* prevalence = app.add_subcommand("prevalence", "Kernel-smoothed grid-cell prevalence");
  std::string prev_grid_cfg, prev_homesteads, prev_residents, prev_status, prev_out;
  int prev_period = 0;
  prevalence->add_option("--grid-config", prev_grid_cfg, "Config JSON providing grid/kernel");
  prevalence->add_option("--homesteads", prev_homesteads, "homesteads.csv");
  prevalence->add_option("--residents", prev_residents, "residents.csv");
  prevalence->add_option("--status", prev_status, "status_<r>.csv");
  prevalence->add_option("--period", prev_period, "Calendar year")->required();
  prevalence->add_option("--out", prev_out, "Output CSV path");

  // activity
  auto* activity = app.add_subcommand("activity", "Activity distributions and spaces from GPS fixes");
  std::string act_fixes, act_grid_cfg, act_regions, act_out = "out";
  double act_gap_min = 0;
  std::string act_gammas;
  activity->add_option("--fixes", act_fixes, "fixes.csv");
  activity->add_option("--grid-config", act_grid_cfg, "Config JSON providing the grid");
  activity->add_option("--regions", act_regions, "regions.geojson");
  activity->add_option("--gap-min", act_gap_min, "Gap threshold in minutes");
  activity->add_option("--gammas", act_gammas, "Gamma list, e.g. 50:95:1,100");
  activity->add_option("--out-dir", act_out, "Output directory");

  // exposure
  auto* exposure = app.add_subcommand("exposure", "Contextual exposure measures per participant");
  std::string exp_activity_dir = "out", exp_prevalence, exp_district_prev, exp_regions,
              exp_out = "out";
  exposure->add_option("--activity-dir", exp_activity_dir, "Activity stage output directory");
  exposure->add_option("--prevalence", exp_prevalence, "prevalence_<period>.csv");
  exposure->add_option("--district-prevalence", exp_district_prev, "district_prevalence.csv");
  exposure->add_option("--regions", exp_regions, "regions.geojson (accepted for interface parity)");
  exposure->add_option("--out-dir", exp_out, "Output directory");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Cohort-level analyses");
  analyze->require_subcommand(1);
  std::string an_exposure = "out/exposure.csv", an_deviations = "out/deviations.csv";
  std::string an_activity_dir = "out", an_participants, an_out;
  double an_gamma = 100;
  std::string an_group = "all";
  auto* an_risk = analyze->add_subcommand("risk", "Risk quadrant stratification");
  an_risk->add_option("--exposure", an_exposure, "exposure.csv");
  an_risk->add_option("--out", an_out, "Output CSV");
  auto* an_cluster = analyze->add_subcommand("cluster", "k-means on exposure deviation curves");
  an_cluster->add_option("--deviations", an_deviations, "deviations.csv");
  an_cluster->add_option("--out", an_out, "Output CSV");
  auto* an_coverage = analyze->add_subcommand("coverage", "Activity-space size curves by sex");
  an_coverage->add_option("--activity-dir", an_activity_dir, "Activity stage output directory");
  an_coverage->add_option("--demographics", an_participants, "participants.csv");
  an_coverage->add_option("--out", an_out, "Output CSV");
  auto* an_overlap = analyze->add_subcommand("overlap", "Sex overlap of collective spaces");
  an_overlap->add_option("--activity-dir", an_activity_dir, "Activity stage output directory");
  an_overlap->add_option("--demographics", an_participants, "participants.csv");
  an_overlap->add_option("--gamma", an_gamma, "Activity-space level")->required();
  an_overlap->add_option("--out", an_out, "Output CSV");
  auto* an_design = analyze->add_subcommand("design", "Regression design table export");
  an_design->add_option("--activity-dir", an_activity_dir, "Activity stage output directory");
  an_design->add_option("--demographics", an_participants, "participants.csv");
  an_design->add_option("--out", an_out, "Output CSV");
  auto* an_logmap = analyze->add_subcommand("logmap", "log(share + epsilon) per grid cell");
  an_logmap->add_option("--activity-dir", an_activity_dir, "Activity stage output directory");
  an_logmap->add_option("--demographics", an_participants, "participants.csv");
  an_logmap->add_option("--group", an_group, "all | F | M");
  an_logmap->add_option("--out", an_out, "Output CSV");

  // run + validate
  auto* run = app.add_subcommand("run", "Run the full pipeline from the config");
  auto* validate = app.add_subcommand("validate", "Schema/type/range report over configured inputs");

  // Global flags may follow the subcommand name.
  for (CLI::App* sub : {synth, impute, prevalence, activity, exposure, analyze, run, validate,
                        an_risk, an_cluster, an_coverage, an_overlap, an_design, an_logmap})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (synth->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      print_stage_result("synth", actex::stage_synth(cfg, synth_out, synth_what));
      return kExitOk;
    }
    if (impute->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      override_path(cfg, "tests", impute_tests);
      override_path(cfg, "rates", impute_rates);
      if (impute_replicates > 0) cfg.replicates = impute_replicates;
      print_stage_result("impute", actex::stage_impute(cfg, cfg.path("tests"), cfg.path("rates"),
                                                       impute_out));
      return kExitOk;
    }
    if (prevalence->parsed()) {
      GlobalOptions gg = g;
      if (gg.config_path.empty()) gg.grid_config_path = prev_grid_cfg;
      actex::PipelineConfig cfg = make_config(gg);
      override_path(cfg, "homesteads", prev_homesteads);
      override_path(cfg, "residents", prev_residents);
      override_path(cfg, "status", prev_status);
      const std::string out = !prev_out.empty()
                                  ? prev_out
                                  : "prevalence_" + std::to_string(prev_period) + ".csv";
      print_stage_result(
          "prevalence",
          actex::stage_prevalence(cfg, cfg.path("homesteads"), cfg.path("residents"),
                                  cfg.path("status"), prev_period, out));
      return kExitOk;
    }
    if (activity->parsed()) {
      GlobalOptions gg = g;
      if (gg.config_path.empty()) gg.grid_config_path = act_grid_cfg;
      actex::PipelineConfig cfg = make_config(gg);
      override_path(cfg, "fixes", act_fixes);
      override_path(cfg, "regions", act_regions);
      if (act_gap_min > 0)
        cfg.gap_seconds = static_cast<std::int64_t>(act_gap_min * 60.0);
      if (!act_gammas.empty()) cfg.gammas = actex::parse_gammas(act_gammas);
      print_stage_result("activity", actex::stage_activity(cfg, cfg.path("fixes"),
                                                           cfg.path("regions"), act_out));
      return kExitOk;
    }
    if (exposure->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      override_path(cfg, "prevalence", exp_prevalence);
      override_path(cfg, "district_prevalence", exp_district_prev);
      print_stage_result(
          "exposure", actex::stage_exposure(cfg, exp_activity_dir, cfg.path("prevalence"),
                                            cfg.path("district_prevalence"), exp_out));
      return kExitOk;
    }
    if (analyze->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      override_path(cfg, "participants", an_participants);
      if (an_risk->parsed()) {
        print_stage_result("analyze risk",
                           actex::analyze_risk(cfg, an_exposure,
                                               an_out.empty() ? "risk.csv" : an_out));
      } else if (an_cluster->parsed()) {
        print_stage_result("analyze cluster",
                           actex::analyze_cluster(cfg, an_deviations,
                                                  an_out.empty() ? "clusters.csv" : an_out));
      } else if (an_coverage->parsed()) {
        print_stage_result(
            "analyze coverage",
            actex::analyze_coverage(cfg, an_activity_dir, cfg.path("participants"),
                                    an_out.empty() ? "coverage.csv" : an_out));
      } else if (an_overlap->parsed()) {
        std::string out = an_out;
        if (out.empty()) {
          out = "overlap_" + actex::fmt_double(an_gamma) + ".csv";
          for (char& c : out)
            if (c == '.') c = 'p';
        }
        print_stage_result("analyze overlap",
                           actex::analyze_overlap(cfg, an_activity_dir, cfg.path("participants"),
                                                  an_gamma, out));
      } else if (an_design->parsed()) {
        print_stage_result(
            "analyze design",
            actex::analyze_design(cfg, an_activity_dir, cfg.path("participants"),
                                  an_out.empty() ? "design_table.csv" : an_out));
      } else if (an_logmap->parsed()) {
        print_stage_result(
            "analyze logmap",
            actex::analyze_logmap(cfg, an_activity_dir, cfg.path("participants"), an_group,
                                  an_out.empty() ? "logmap_" + an_group + ".csv" : an_out));
      }
      return kExitOk;
    }
    if (run->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      const actex::RunManifest manifest = actex::run_pipeline(cfg);
      std::printf("run complete: %zu stages, manifest at %s\n", manifest.stages.size(),
                  (cfg.out_dir() + "/manifest.json").c_str());
      for (const auto& s : manifest.stages)
        std::printf("  %-18s %8lld rows %6lld warnings %10.1f ms\n", s.name.c_str(),
                    static_cast<long long>(s.rows), static_cast<long long>(s.warnings),
                    s.wall_ms);
      return kExitOk;
    }
    if (validate->parsed()) {
      actex::PipelineConfig cfg = make_config(g);
      const auto findings = actex::validate_inputs(cfg);
      if (findings.empty()) {
        std::printf("validate: no findings\n");
        return kExitOk;
      }
      for (const auto& f : findings) {
        if (f.row > 0)
          std::printf("%s:%lld: %s\n", f.file.c_str(), static_cast<long long>(f.row),
                      f.message.c_str());
        else
          std::printf("%s: %s\n", f.file.c_str(), f.message.c_str());
      }
      std::printf("validate: %zu findings\n", findings.size());
      return kExitValidation;
    }
  } catch (const actex::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return actex::is_validation_error(e.kind()) ? kExitValidation : kExitCompute;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCompute;
  }
  return kExitOk;
}
