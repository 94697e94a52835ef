#include "actex/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <unordered_map>

#include <omp.h>

#include "actex/csv.hpp"
#include "actex/error.hpp"
#include "json.hpp"

namespace actex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::string& where,
                 std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys)
      if (key == k) {
        known = true;
        break;
      }
    if (!known) raise(ErrorKind::config, "unknown config key '" + where + key + "'");
  }
}

Box parse_box(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 4)
    raise(ErrorKind::config, where + ": expected [x0, y0, x1, y1]");
  Box b{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(), arr[3].get<double>()};
  b.validate(where);
  return b;
}

DistributionSpec parse_distribution(const json& obj, const std::string& where) {
  expect_keys(obj, where + ".", {"family", "min_s", "max_s", "mean_s"});
  DistributionSpec spec;
  const std::string family = obj.value("family", "uniform");
  if (family == "uniform") {
    spec.family = DistributionSpec::Family::uniform;
    spec.a = obj.value("min_s", 0.0);
    spec.b = obj.value("max_s", 0.0);
  } else if (family == "exponential") {
    spec.family = DistributionSpec::Family::exponential;
    spec.a = obj.value("mean_s", 0.0);
  } else {
    raise(ErrorKind::config, where + ": unknown family '" + family + "'");
  }
  spec.validate(where);
  return spec;
}

Sex parse_sex_or_fail(const std::string& s, const std::string& where) {
  const auto sex = parse_sex(s);
  if (!sex) raise(ErrorKind::config, where + ": expected sex F or M, got '" + s + "'");
  return *sex;
}

SynthConfig parse_synth(const json& obj, std::uint64_t seed) {
  expect_keys(obj, "synth.", {"cohort", "trajectories", "regions"});
  SynthConfig cfg;
  cfg.seed = seed;

  if (obj.contains("cohort")) {
    const auto& c = obj["cohort"];
    expect_keys(c, "synth.cohort.",
                {"first_period", "last_period", "age_min", "age_max", "homesteads_per_group",
                 "rates", "groups"});
    auto& cc = cfg.cohort;
    cc.first_period = c.value("first_period", cc.first_period);
    cc.last_period = c.value("last_period", cc.last_period);
    cc.age_min = c.value("age_min", cc.age_min);
    cc.age_max = c.value("age_max", cc.age_max);
    cc.homesteads_per_group = c.value("homesteads_per_group", cc.homesteads_per_group);
    for (const auto& r : c.value("rates", json::array())) {
      expect_keys(r, "synth.cohort.rates[].",
                  {"sex", "age_lo", "age_hi", "prevalence", "incidence"});
      cc.rates.push_back(SynthRateBand{
          parse_sex_or_fail(r.value("sex", ""), "synth.cohort.rates[].sex"),
          r.value("age_lo", 0), r.value("age_hi", 0), r.value("prevalence", 0.0),
          r.value("incidence", 0.0)});
    }
    for (const auto& g : c.value("groups", json::array())) {
      expect_keys(g, "synth.cohort.groups[].",
                  {"name", "count", "female_share", "home_box", "attendance_prob", "prevalence",
                   "incidence"});
      SynthCohortGroup group;
      group.name = g.value("name", "cohort");
      group.count = g.value("count", 0);
      group.female_share = g.value("female_share", 0.5);
      group.attendance_prob = g.value("attendance_prob", 0.5);
      group.home_box = parse_box(g.at("home_box"), "synth.cohort.groups[].home_box");
      if (g.contains("prevalence") || g.contains("incidence")) {
        group.override_rates =
            Rates{g.value("prevalence", 0.0), g.value("incidence", 0.0)};
      }
      cc.groups.push_back(std::move(group));
    }
  }

  if (obj.contains("trajectories")) {
    const auto& t = obj["trajectories"];
    expect_keys(t, "synth.trajectories.", {"start", "days", "groups"});
    auto& tc = cfg.trajectories;
    if (t.contains("start")) tc.start_epoch_s = parse_datetime_utc(t["start"].get<std::string>());
    tc.days = t.value("days", tc.days);
    for (const auto& g : t.value("groups", json::array())) {
      expect_keys(g, "synth.trajectories.groups[].",
                  {"name", "sex", "count", "n_anchors", "anchor_box", "p_away", "away_box",
                   "dwell", "travel_speed_mps", "fix_interval_s", "gap"});
      SynthTrajectoryGroup group;
      group.name = g.value("name", "gps");
      if (g.contains("sex"))
        group.sex = parse_sex_or_fail(g["sex"].get<std::string>(),
                                      "synth.trajectories.groups[].sex");
      group.count = g.value("count", 0);
      group.n_anchors = g.value("n_anchors", 3);
      group.anchor_box = parse_box(g.at("anchor_box"), "synth.trajectories.groups[].anchor_box");
      group.p_away = g.value("p_away", 0.0);
      if (g.contains("away_box"))
        group.away_box = parse_box(g["away_box"], "synth.trajectories.groups[].away_box");
      if (g.contains("dwell"))
        group.dwell = parse_distribution(g["dwell"], "synth.trajectories.groups[].dwell");
      group.travel_speed_mps = g.value("travel_speed_mps", 10.0);
      group.fix_interval_s = g.value("fix_interval_s", 60.0);
      if (g.contains("gap")) {
        expect_keys(g["gap"], "synth.trajectories.groups[].gap.", {"prob", "length"});
        group.gap.prob = g["gap"].value("prob", 0.0);
        if (g["gap"].contains("length"))
          group.gap.length =
              parse_distribution(g["gap"]["length"], "synth.trajectories.groups[].gap.length");
      }
      tc.groups.push_back(std::move(group));
    }
  }

  if (obj.contains("regions")) {
    const auto& r = obj["regions"];
    expect_keys(r, "synth.regions.", {"study_area_box", "districts"});
    cfg.regions.study_area = parse_box(r.at("study_area_box"), "synth.regions.study_area_box");
    for (const auto& d : r.value("districts", json::array())) {
      expect_keys(d, "synth.regions.districts[].", {"id", "box", "prevalence"});
      cfg.regions.districts.push_back(SynthDistrict{
          d.value("id", std::int64_t{0}), parse_box(d.at("box"), "synth.regions.districts[].box"),
          d.value("prevalence", 0.0)});
    }
  }
  return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
}

std::string sanitize_person_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

std::string fmt_value(double v, bool percent) {
  if (is_missing(v)) return "";
  return fmt_double(percent ? v * 100.0 : v);
}

std::string gamma_tag(double gamma) {
  std::string s = fmt_double(gamma);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

}  // namespace

std::string PipelineConfig::path(const std::string& name) const {
  const auto it = paths.find(name);
  if (it == paths.end() || it->second.empty())
    raise(ErrorKind::config, "missing path '" + name + "' (set paths." + name + " or the CLI flag)");
  return it->second;
}

std::string PipelineConfig::out_dir() const {
  const auto it = paths.find("out_dir");
  return it != paths.end() && !it->second.empty() ? it->second : std::string("out");
}

void PipelineConfig::require_grid() const {
  if (!has_grid) raise(ErrorKind::config, "this operation needs the grid config (grid.*)");
}

std::vector<double> parse_gammas(const std::string& spec) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string item =
        spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) raise(ErrorKind::config, "empty gamma item in '" + spec + "'");
    const std::size_t c1 = item.find(':');
    try {
      if (c1 == std::string::npos) {
        out.push_back(std::stod(item));
      } else {
        const std::size_t c2 = item.find(':', c1 + 1);
        const double lo = std::stod(item.substr(0, c1));
        const double hi =
            std::stod(item.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1));
        const double step = c2 == std::string::npos ? 1.0 : std::stod(item.substr(c2 + 1));
        if (!(step > 0) || hi < lo)
          raise(ErrorKind::config, "bad gamma range '" + item + "'");
        for (double g = lo; g <= hi + 1e-9; g += step) out.push_back(g);
      }
    } catch (const std::invalid_argument&) {
      raise(ErrorKind::config, "bad gamma item '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (const double g : out)
    if (!(g > 0 && g <= 100)) raise(ErrorKind::config, "gamma out of (0, 100]: " + fmt_double(g));
  return out;
}

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.gammas = parse_gammas("50:95:1,100");
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::io, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::config, path + ": invalid JSON: " + e.what());
  }
  expect_keys(doc, "",
              {"seed", "threads", "units", "replicates", "status_replicate", "prevalence_period",
               "grid", "kernel", "activity", "risk", "cluster", "coverage", "analyze", "plot",
               "paths", "stages", "synth"});

  PipelineConfig cfg = default_pipeline_config();
  cfg.canonical_json = doc.dump();
  cfg.seed = doc.value("seed", std::uint64_t{0});
  cfg.threads = doc.value("threads", 0);
  const std::string units = doc.value("units", "proportion");
  if (units != "proportion" && units != "percent")
    raise(ErrorKind::config, "units must be 'proportion' or 'percent'");
  cfg.percent_units = units == "percent";
  cfg.replicates = doc.value("replicates", 1);
  cfg.status_replicate = doc.value("status_replicate", 1);
  if (doc.contains("prevalence_period")) cfg.prevalence_period = doc["prevalence_period"].get<int>();
  if (cfg.replicates < 1) raise(ErrorKind::config, "replicates must be >= 1");
  if (cfg.status_replicate < 1 || cfg.status_replicate > cfg.replicates)
    raise(ErrorKind::config, "status_replicate must be in [1, replicates]");

  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    expect_keys(g, "grid.",
                {"origin_lon", "origin_lat", "ref_lat", "cell_size_m", "n_cols", "n_rows"});
    cfg.projection.origin_lon = g.value("origin_lon", 0.0);
    cfg.projection.origin_lat = g.value("origin_lat", 0.0);
    cfg.projection.ref_lat = g.value("ref_lat", cfg.projection.origin_lat);
    cfg.grid.origin = PlanarPoint{0, 0};
    cfg.grid.cell_size = g.value("cell_size_m", 100.0);
    cfg.grid.n_cols = g.value("n_cols", std::int64_t{0});
    cfg.grid.n_rows = g.value("n_rows", std::int64_t{0});
    cfg.grid.validate();
    cfg.has_grid = true;
  }

  if (doc.contains("kernel")) {
    const auto& k = doc["kernel"];
    expect_keys(k, "kernel.", {"s_km", "radius_km"});
    cfg.kernel.s_km = k.value("s_km", cfg.kernel.s_km);
    cfg.kernel.radius_km = k.value("radius_km", cfg.kernel.radius_km);
    cfg.kernel.validate();
  }

  if (doc.contains("activity")) {
    const auto& a = doc["activity"];
    expect_keys(a, "activity.", {"gap_minutes", "gammas", "pooling", "home_gamma"});
    const double gap_minutes = a.value("gap_minutes", 30.0);
    if (!(gap_minutes > 0)) raise(ErrorKind::config, "gap_minutes must be > 0");
    cfg.gap_seconds = static_cast<std::int64_t>(std::llround(gap_minutes * 60.0));
    if (a.contains("gammas")) cfg.gammas = parse_gammas(a["gammas"].get<std::string>());
    const std::string pooling = a.value("pooling", "duration_weighted");
    if (pooling == "duration_weighted")
      cfg.pooling = PoolMode::duration_weighted;
    else if (pooling == "unweighted")
      cfg.pooling = PoolMode::unweighted;
    else
      raise(ErrorKind::config, "pooling must be duration_weighted or unweighted");
    cfg.home_gamma = a.value("home_gamma", 50.0);
    if (!(cfg.home_gamma > 0 && cfg.home_gamma <= 100))
      raise(ErrorKind::config, "home_gamma out of (0, 100]");
  }

  if (doc.contains("risk")) {
    const auto& r = doc["risk"];
    expect_keys(r, "risk.", {"low_percentile", "high_percentile"});
    cfg.risk_low_percentile = r.value("low_percentile", 40.0);
    cfg.risk_high_percentile = r.value("high_percentile", 60.0);
    if (!(cfg.risk_low_percentile < cfg.risk_high_percentile))
      raise(ErrorKind::config, "risk.low_percentile must be below risk.high_percentile");
  }

  if (doc.contains("cluster")) {
    const auto& c = doc["cluster"];
    expect_keys(c, "cluster.", {"k", "restarts", "max_iterations"});
    cfg.cluster_k = c.value("k", 3);
    cfg.cluster_restarts = c.value("restarts", 10);
    cfg.cluster_max_iterations = c.value("max_iterations", 100);
  }

  if (doc.contains("coverage")) {
    const auto& c = doc["coverage"];
    expect_keys(c, "coverage.", {"balance", "repetitions"});
    cfg.coverage_balance = c.value("balance", true);
    cfg.coverage_repetitions = c.value("repetitions", 100);
    if (cfg.coverage_repetitions < 1) raise(ErrorKind::config, "coverage.repetitions must be >= 1");
  }

  if (doc.contains("analyze")) {
    const auto& a = doc["analyze"];
    expect_keys(a, "analyze.", {"overlap_gammas", "logmap_groups"});
    if (a.contains("overlap_gammas")) {
      cfg.overlap_gammas.clear();
      for (const auto& g : a["overlap_gammas"]) cfg.overlap_gammas.push_back(g.get<double>());
    }
    if (a.contains("logmap_groups")) {
      cfg.logmap_groups.clear();
      for (const auto& g : a["logmap_groups"]) cfg.logmap_groups.push_back(g.get<std::string>());
    }
  }

  if (doc.contains("plot")) {
    expect_keys(doc["plot"], "plot.", {"epsilon"});
    cfg.plot_epsilon = doc["plot"].value("epsilon", 1e-15);
    if (!(cfg.plot_epsilon > 0)) raise(ErrorKind::config, "plot.epsilon must be > 0");
  }

  if (doc.contains("paths")) {
    for (const auto& [key, value] : doc["paths"].items()) {
      static const char* known[] = {"out_dir",   "regions",   "tests",        "rates",
                                    "homesteads", "residents", "fixes",        "status",
                                    "district_prevalence",     "participants", "prevalence",
                                    "activity_dir", "exposure", "deviations"};
      bool ok = false;
      for (const char* k : known)
        if (key == k) ok = true;
      if (!ok) raise(ErrorKind::config, "unknown config key 'paths." + key + "'");
      cfg.paths[key] = value.get<std::string>();
    }
  }

  if (doc.contains("stages"))
    for (const auto& s : doc["stages"]) cfg.stages.push_back(s.get<std::string>());

  if (doc.contains("synth")) cfg.synth = parse_synth(doc["synth"], cfg.seed);
  return cfg;
}

// --- ingestion ---------------------------------------------------------------

std::vector<SurveillanceRecord> load_surveillance_records(const std::string& path) {
  CsvReader in(path, {"person_id", "sex", "birth_date", "entry_date", "exit_date", "test_date",
                      "result"});
  std::vector<SurveillanceRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  while (in.next()) {
    const std::string pid = in.get_string(0);
    if (pid.empty()) in.fail(0, "empty person_id");
    const auto sex = parse_sex(in.field(1));
    if (!sex) in.fail(1, "expected F or M");
    const auto birth = try_parse_date(in.field(2));
    if (!birth) in.fail(2, "not an ISO-8601 date");
    const auto entry = try_parse_date(in.field(3));
    if (!entry) in.fail(3, "not an ISO-8601 date");
    const auto exit = try_parse_date(in.field(4));
    if (!exit) in.fail(4, "not an ISO-8601 date");

    auto [it, inserted] = index.try_emplace(pid, records.size());
    if (inserted) {
      SurveillanceRecord rec;
      rec.person_id = pid;
      rec.sex = *sex;
      rec.birth = *birth;
      rec.entry_period = entry->year;
      rec.exit_period = exit->year;
      records.push_back(std::move(rec));
    } else {
      const SurveillanceRecord& rec = records[it->second];
      if (rec.sex != *sex || !(rec.birth == *birth) || rec.entry_period != entry->year ||
          rec.exit_period != exit->year)
        in.fail_row("inconsistent demographics for person " + pid);
    }

    const std::string_view test_date = in.field(5);
    const std::string_view result = in.field(6);
    if (test_date.empty()) {
      if (!result.empty()) in.fail(6, "result given without test_date");
      continue;
    }
    const auto td = try_parse_date(test_date);
    if (!td) in.fail(5, "not an ISO-8601 date");
    bool positive = false;
    if (result == "pos")
      positive = true;
    else if (result != "neg")
      in.fail(6, "expected neg or pos");
    records[it->second].tests.push_back(TestObservation{td->year, positive});
  }
  for (auto& rec : records) {
    std::sort(rec.tests.begin(), rec.tests.end(), [](const auto& a, const auto& b) {
      if (a.period != b.period) return a.period < b.period;
      return a.positive < b.positive;
    });
    rec.tests.erase(std::unique(rec.tests.begin(), rec.tests.end(),
                                [](const auto& a, const auto& b) {
                                  return a.period == b.period && a.positive == b.positive;
                                }),
                    rec.tests.end());
    rec.validate();
  }
  return records;
}

std::vector<FixSequence> load_fixes(const std::string& path, const Projection& proj) {
  CsvReader in(path, {"person_id", "timestamp", "lon", "lat"});
  std::vector<FixSequence> sequences;
  std::unordered_map<std::string, std::size_t> index;
  while (in.next()) {
    const std::string pid = in.get_string(0);
    if (pid.empty()) in.fail(0, "empty person_id");
    const auto t = try_parse_datetime_utc(in.field(1));
    if (!t) in.fail(1, "not an ISO-8601 UTC timestamp");
    const double lon = in.get_double(2);
    const double lat = in.get_double(3);
    PlanarPoint p;
    try {
      p = proj.to_planar(lon, lat);
    } catch (const Error& e) {
      in.fail(2, e.what());
    }
    auto [it, inserted] = index.try_emplace(pid, sequences.size());
    if (inserted) sequences.push_back(FixSequence{pid, {}});
    sequences[it->second].fixes.push_back(GpsFix{*t, p});
  }
  for (auto& seq : sequences) {
    std::sort(seq.fixes.begin(), seq.fixes.end(),
              [](const GpsFix& a, const GpsFix& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < seq.fixes.size(); ++i) {
      if (seq.fixes[i].t == seq.fixes[i - 1].t)
        raise(ErrorKind::record, "person " + seq.person_id + ": duplicate timestamp " +
                                     format_datetime_utc(seq.fixes[i].t));
    }
    seq.validate();
  }
  return sequences;
}

PrevalenceField load_prevalence_csv(const std::string& path, bool percent_units) {
  CsvReader in(path, {"cell_id", "prevalence"});
  std::vector<std::pair<CellId, double>> rows;
  const double upper = percent_units ? 100.0 : 1.0;
  CellId max_cell = -1;
  while (in.next()) {
    const CellId cell = in.get_int(0);
    if (cell < 0) in.fail(0, "negative cell_id");
    double v = missing_value();
    const auto parsed = in.get_optional_double(1);
    if (parsed) {
      if (!(*parsed >= 0 && *parsed <= upper)) in.fail(1, "prevalence out of range");
      v = percent_units ? *parsed / 100.0 : *parsed;
    }
    rows.emplace_back(cell, v);
    max_cell = std::max(max_cell, cell);
  }
  PrevalenceField field;
  field.values.assign(static_cast<std::size_t>(max_cell + 1), missing_value());
  for (const auto& [cell, v] : rows) field.values[static_cast<std::size_t>(cell)] = v;
  return field;
}

namespace {

std::unordered_map<std::string, StatusSequence> load_status_csv(const std::string& path) {
  CsvReader in(path, {"person_id", "period", "status"});
  std::unordered_map<std::string, std::map<int, std::uint8_t>> acc;
  while (in.next()) {
    const std::string pid = in.get_string(0);
    const auto period = static_cast<int>(in.get_int(1));
    const std::int64_t status = in.get_int(2);
    if (status != 0 && status != 1) in.fail(2, "status must be 0 or 1");
    acc[pid][period] = static_cast<std::uint8_t>(status);
  }
  std::unordered_map<std::string, StatusSequence> out;
  for (auto& [pid, periods] : acc) {
    StatusSequence seq;
    seq.person_id = pid;
    seq.entry_period = periods.begin()->first;
    int expected = seq.entry_period;
    for (const auto& [period, status] : periods) {
      if (period != expected)
        raise(ErrorKind::schema,
              path + ": person " + pid + " has a hole at period " + std::to_string(expected));
      seq.status.push_back(status);
      ++expected;
    }
    out.emplace(pid, std::move(seq));
  }
  return out;
}

}  // namespace

// --- synth stage -------------------------------------------------------------

StageResult stage_synth(const PipelineConfig& cfg, const std::string& out_dir,
                        const std::string& what) {
  if (!cfg.synth) raise(ErrorKind::config, "synth stage needs a synth config block");
  cfg.require_grid();
  ensure_dir(out_dir);
  StageResult res;
  const bool do_cohort = what == "all" || what == "cohort";
  const bool do_traj = what == "all" || what == "trajectories";

  auto open = [&](const std::string& name, const std::string& header) {
    auto file = std::make_unique<AtomicFile>(join(out_dir, name));
    file->stream() << header << "\n";
    res.outputs.push_back(join(out_dir, name));
    return file;
  };

  if (do_cohort) {
    const SynthCohort cohort = gen_cohort(*cfg.synth);

    auto rates = open("rates.csv", "sex,age_group,period,prevalence,incidence");
    for (const auto& band : cfg.synth->cohort.rates) {
      for (int p = cfg.synth->cohort.first_period; p <= cfg.synth->cohort.last_period; ++p) {
        rates->stream() << sex_code(band.sex) << ',' << band.age_lo << '-' << band.age_hi << ','
                        << p << ',' << fmt_double(band.prevalence) << ','
                        << fmt_double(band.incidence) << "\n";
        ++res.rows;
      }
    }
    rates->commit();

    auto tests = open("tests.csv",
                      "person_id,sex,birth_date,entry_date,exit_date,test_date,result");
    for (const auto& rec : cohort.records) {
      const std::string base = rec.person_id + "," + sex_code(rec.sex) + "," +
                               format_date(rec.birth) + "," +
                               format_date(CivilDate{rec.entry_period, 1, 1}) + "," +
                               format_date(CivilDate{rec.exit_period, 12, 31});
      if (rec.tests.empty()) {
        tests->stream() << base << ",,\n";
        ++res.rows;
      } else {
        for (const auto& t : rec.tests) {
          tests->stream() << base << ',' << format_date(CivilDate{t.period, 7, 1}) << ','
                          << (t.positive ? "pos" : "neg") << "\n";
          ++res.rows;
        }
      }
    }
    tests->commit();

    auto truth = open("truth_status.csv", "person_id,sero_period");
    for (const auto& t : cohort.truth) {
      truth->stream() << t.person_id << ','
                      << (t.sero_period ? std::to_string(*t.sero_period) : std::string()) << "\n";
      ++res.rows;
    }
    truth->commit();

    auto homesteads = open("homesteads.csv", "homestead_id,lon,lat");
    for (const auto& h : cohort.homesteads) {
      double lon = 0, lat = 0;
      cfg.projection.to_lonlat(h.location, lon, lat);
      homesteads->stream() << h.id << ',' << fmt_double(lon) << ',' << fmt_double(lat) << "\n";
      ++res.rows;
    }
    homesteads->commit();

    auto residents = open("residents.csv", "person_id,homestead_id,period");
    for (const auto& r : cohort.residents) {
      residents->stream() << r.person_id << ',' << r.homestead_id << ',' << r.period << "\n";
      ++res.rows;
    }
    residents->commit();
  }

  if (do_traj) {
    const SynthTrajectories traj = gen_trajectories(*cfg.synth);

    auto participants = open("participants.csv", "person_id,sex,birth_date");
    for (const auto& p : traj.participants) {
      participants->stream() << p.person_id << ',' << sex_code(p.sex) << ','
                             << format_date(p.birth) << "\n";
      ++res.rows;
    }
    participants->commit();

    auto fixes = open("fixes.csv", "person_id,timestamp,lon,lat");
    for (const auto& seq : traj.fixes) {
      for (const auto& fix : seq.fixes) {
        double lon = 0, lat = 0;
        cfg.projection.to_lonlat(fix.p, lon, lat);
        fixes->stream() << seq.person_id << ',' << format_datetime_utc(fix.t) << ','
                        << fmt_double(lon) << ',' << fmt_double(lat) << "\n";
        ++res.rows;
      }
    }
    fixes->commit();

    // Region polygons and the district prevalence table.
    auto ring_of = [&](const Box& b) {
      json ring = json::array();
      const PlanarPoint corners[5] = {{b.x0, b.y0}, {b.x1, b.y0}, {b.x1, b.y1}, {b.x0, b.y1},
                                      {b.x0, b.y0}};
      for (const auto& c : corners) {
        double lon = 0, lat = 0;
        cfg.projection.to_lonlat(c, lon, lat);
        ring.push_back(json::array({lon, lat}));
      }
      return json::array({ring});
    };
    json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = json::array();
    {
      json f;
      f["type"] = "Feature";
      f["properties"] = {{"study_area", true}};
      f["geometry"] = {{"type", "Polygon"}, {"coordinates", ring_of(cfg.synth->regions.study_area)}};
      fc["features"].push_back(f);
    }
    for (const auto& d : cfg.synth->regions.districts) {
      json f;
      f["type"] = "Feature";
      f["properties"] = {{"district_id", d.id}};
      f["geometry"] = {{"type", "Polygon"}, {"coordinates", ring_of(d.box)}};
      fc["features"].push_back(f);
    }
    AtomicFile regions(join(out_dir, "regions.geojson"));
    regions.stream() << fc.dump(2) << "\n";
    regions.commit();
    res.outputs.push_back(join(out_dir, "regions.geojson"));

    auto dp = open("district_prevalence.csv", "district_id,prevalence");
    for (const auto& d : cfg.synth->regions.districts) {
      dp->stream() << d.id << ',' << fmt_value(d.prevalence, cfg.percent_units) << "\n";
      ++res.rows;
    }
    dp->commit();
  }
  return res;
}

// --- impute stage ------------------------------------------------------------

StageResult stage_impute(const PipelineConfig& cfg, const std::string& tests_path,
                         const std::string& rates_path, const std::string& out_dir) {
  ensure_dir(out_dir);
  const auto records = load_surveillance_records(tests_path);
  const RateTable rates = load_rate_table(rates_path);
  const auto datasets = impute_cohort(records, rates, cfg.seed, cfg.replicates);

  StageResult res;
  for (int r = 0; r < cfg.replicates; ++r) {
    const std::string path = join(out_dir, "status_" + std::to_string(r + 1) + ".csv");
    AtomicFile out(path);
    out.stream() << "person_id,period,status\n";
    for (const auto& seq : datasets[static_cast<std::size_t>(r)]) {
      for (int t = seq.entry_period; t <= seq.exit_period(); ++t) {
        out.stream() << seq.person_id << ',' << t << ',' << int(seq.at(t)) << "\n";
        ++res.rows;
      }
    }
    out.commit();
    res.outputs.push_back(path);
  }
  return res;
}

// --- prevalence stage ----------------------------------------------------------

StageResult stage_prevalence(const PipelineConfig& cfg, const std::string& homesteads_path,
                             const std::string& residents_path, const std::string& status_path,
                             int period, const std::string& out_path) {
  cfg.require_grid();
  StageResult res;

  std::vector<Homestead> homesteads;
  std::unordered_map<std::int64_t, std::size_t> homestead_index;
  {
    CsvReader in(homesteads_path, {"homestead_id", "lon", "lat"});
    while (in.next()) {
      const std::int64_t id = in.get_int(0);
      PlanarPoint p;
      try {
        p = cfg.projection.to_planar(in.get_double(1), in.get_double(2));
      } catch (const Error& e) {
        in.fail(1, e.what());
      }
      if (!homestead_index.try_emplace(id, homesteads.size()).second)
        in.fail(0, "duplicate homestead_id");
      homesteads.push_back(Homestead{id, p});
    }
  }

  const auto statuses = load_status_csv(status_path);

  std::unordered_map<std::int64_t, std::pair<std::int64_t, std::int64_t>> counts;  // id -> (pos, total)
  {
    CsvReader in(residents_path, {"person_id", "homestead_id", "period"});
    while (in.next()) {
      if (static_cast<int>(in.get_int(2)) != period) continue;
      const std::int64_t hid = in.get_int(1);
      if (!homestead_index.count(hid)) in.fail(1, "unknown homestead_id");
      const std::string pid = in.get_string(0);
      const auto it = statuses.find(pid);
      if (it == statuses.end() || period < it->second.entry_period ||
          period > it->second.exit_period()) {
        ++res.warnings;  // resident without an imputed status that year
        continue;
      }
      auto& c = counts[hid];
      c.first += it->second.at(period);
      c.second += 1;
    }
  }

  std::vector<HomesteadYear> years;
  years.reserve(counts.size());
  for (const auto& h : homesteads) {
    const auto it = counts.find(h.id);
    if (it == counts.end()) continue;
    years.push_back(HomesteadYear{h.id, h.location, period, it->second.second, it->second.first});
  }

  const PrevalenceField field = prevalence_field(cfg.grid, std::move(years), cfg.kernel);

  AtomicFile out(out_path);
  out.stream() << "cell_id,center_x,center_y,prevalence\n";
  for (CellId id = 0; id < cfg.grid.cell_count(); ++id) {
    const PlanarPoint c = cfg.grid.centroid(id);
    out.stream() << id << ',' << fmt_double(c.x) << ',' << fmt_double(c.y) << ','
                 << fmt_value(field.value(id), cfg.percent_units) << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

// --- activity stage ------------------------------------------------------------

namespace {

struct PersonActivity {
  std::string person_id;
  bool has_dist = false;
  ActivityDistribution dist;                                     // inside cells
  std::vector<std::pair<std::int64_t, std::int64_t>> districts;  // id -> seconds
  std::int64_t inside_seconds = 0, outside_seconds = 0, mixed_seconds = 0, unmapped_seconds = 0;
  std::int64_t gap_count = 0, retained_seconds = 0;
  std::int64_t anchor_ts = 0;  // start of the longest contiguous retained run
  std::vector<ActivitySpace> spaces;
};

std::int64_t longest_observation_start(const SegmentSet& segs, std::int64_t fallback) {
  if (segs.intervals.empty()) return fallback;
  std::int64_t best_start = segs.intervals.front().t0;
  std::int64_t best_len = -1;
  std::int64_t run_start = segs.intervals.front().t0;
  std::int64_t run_end = segs.intervals.front().t1;
  auto flush = [&]() {
    const std::int64_t len = run_end - run_start;
    if (len > best_len) {
      best_len = len;
      best_start = run_start;
    }
  };
  for (std::size_t i = 1; i < segs.intervals.size(); ++i) {
    const auto& iv = segs.intervals[i];
    if (iv.t0 == run_end) {
      run_end = iv.t1;
    } else {
      flush();
      run_start = iv.t0;
      run_end = iv.t1;
    }
  }
  flush();
  return best_start;
}

}  // namespace

StageResult stage_activity(const PipelineConfig& cfg, const std::string& fixes_path,
                           const std::string& regions_path, const std::string& out_dir) {
  cfg.require_grid();
  ensure_dir(out_dir);
  const RegionIndex regions = load_regions(regions_path, cfg.projection);
  const auto sequences = load_fixes(fixes_path, cfg.projection);

  {
    std::unordered_map<std::string, std::string> names;
    for (const auto& seq : sequences) {
      const auto [it, inserted] = names.try_emplace(sanitize_person_id(seq.person_id),
                                                    seq.person_id);
      if (!inserted)
        raise(ErrorKind::record, "person ids '" + it->second + "' and '" + seq.person_id +
                                     "' collide after filename sanitization");
    }
  }

  std::vector<PersonActivity> results(sequences.size());
  std::string first_error;
  ErrorKind first_error_kind{};
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(sequences.size()); ++i) {
    if (failed) continue;
    try {
      const FixSequence& seq = sequences[static_cast<std::size_t>(i)];
      PersonActivity out;
      out.person_id = seq.person_id;
      const SegmentSet segs = segment(seq, cfg.gap_seconds);
      out.gap_count = segs.gap_count;
      out.retained_seconds = segs.retained_seconds;
      out.anchor_ts = longest_observation_start(segs, seq.fixes.empty() ? 0 : seq.fixes.front().t);
      SplitOutcome split = split_in_out(segs, regions);
      out.districts = std::move(split.district_seconds);
      out.inside_seconds = split.inside_seconds;
      out.outside_seconds = split.outside_seconds;
      out.mixed_seconds = split.mixed_seconds;
      out.unmapped_seconds = split.unmapped_seconds;
      try {
        out.dist = cpt_estimate(split.inside, cfg.grid);
        out.has_dist = true;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::empty_support) throw;
      }
      if (out.has_dist) {
        out.spaces.reserve(cfg.gammas.size());
        for (const double g : cfg.gammas) out.spaces.push_back(activity_space(out.dist, g));
      }
      results[static_cast<std::size_t>(i)] = std::move(out);
    } catch (const Error& e) {
#pragma omp critical
      if (!failed) {
        failed = true;
        first_error_kind = e.kind();
        first_error = e.what();
      }
    }
  }
  if (failed) raise(first_error_kind, first_error);

  StageResult res;
  AtomicFile persons(join(out_dir, "persons.csv"));
  persons.stream() << "person_id,inside_seconds,outside_seconds,mixed_seconds,unmapped_seconds,"
                      "gap_count,retained_seconds,cpt_seconds,anchor_ts\n";
  AtomicFile spaces(join(out_dir, "spaces.csv"));
  spaces.stream() << "person_id,gamma,n_cells,captured\n";

  for (const auto& person : results) {
    persons.stream() << person.person_id << ',' << person.inside_seconds << ','
                     << person.outside_seconds << ',' << person.mixed_seconds << ','
                     << person.unmapped_seconds << ',' << person.gap_count << ','
                     << person.retained_seconds << ','
                     << fmt_double(person.has_dist ? person.dist.total_seconds : 0.0) << ','
                     << format_datetime_utc(person.anchor_ts) << "\n";
    ++res.rows;
    if (!person.has_dist) ++res.warnings;

    const std::string tag = sanitize_person_id(person.person_id);
    if (person.has_dist) {
      AtomicFile activity(join(out_dir, "activity_" + tag + ".csv"));
      activity.stream() << "cell_id,proportion,seconds\n";
      for (const auto& [cell, share] : person.dist.share)
        activity.stream() << cell << ',' << fmt_double(share) << ','
                          << fmt_double(share * person.dist.total_seconds) << "\n";
      activity.commit();
      res.outputs.push_back(join(out_dir, "activity_" + tag + ".csv"));
      for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
        const ActivitySpace& space = person.spaces[gi];
        spaces.stream() << person.person_id << ',' << fmt_double(space.gamma) << ','
                        << space.cells.size() << ',' << fmt_double(space.captured) << "\n";
      }
    }
    if (!person.districts.empty()) {
      AtomicFile districts(join(out_dir, "districts_" + tag + ".csv"));
      districts.stream() << "district_id,seconds\n";
      for (const auto& [district, seconds] : person.districts)
        districts.stream() << district << ',' << seconds << "\n";
      districts.commit();
      res.outputs.push_back(join(out_dir, "districts_" + tag + ".csv"));
    }
  }
  persons.commit();
  spaces.commit();
  res.outputs.push_back(join(out_dir, "persons.csv"));
  res.outputs.push_back(join(out_dir, "spaces.csv"));
  return res;
}

// --- exposure stage ------------------------------------------------------------

namespace {

struct PersonSummaryRow {
  std::string person_id;
  std::int64_t inside_seconds = 0, outside_seconds = 0;
  double cpt_seconds = 0;
  std::string anchor_ts;
};

std::vector<PersonSummaryRow> load_person_summaries(const std::string& activity_dir) {
  CsvReader in(join(activity_dir, "persons.csv"),
               {"person_id", "inside_seconds", "outside_seconds", "cpt_seconds", "anchor_ts"});
  std::vector<PersonSummaryRow> out;
  while (in.next()) {
    PersonSummaryRow row;
    row.person_id = in.get_string(0);
    row.inside_seconds = in.get_int(1);
    row.outside_seconds = in.get_int(2);
    row.cpt_seconds = in.get_double(3);
    row.anchor_ts = in.get_string(4);
    out.push_back(std::move(row));
  }
  return out;
}

std::optional<ActivityDistribution> load_activity_csv(const std::string& activity_dir,
                                                      const std::string& person_id,
                                                      double total_seconds) {
  const std::string path =
      join(activity_dir, "activity_" + sanitize_person_id(person_id) + ".csv");
  if (!fs::exists(path)) return std::nullopt;
  CsvReader in(path, {"cell_id", "proportion"});
  ActivityDistribution dist;
  dist.id = person_id;
  dist.total_seconds = total_seconds;
  while (in.next()) {
    const double share = in.get_double(1);
    if (!(share >= 0)) in.fail(1, "negative proportion");
    dist.share.emplace_back(in.get_int(0), share);
  }
  std::sort(dist.share.begin(), dist.share.end());
  if (dist.share.empty()) return std::nullopt;
  return dist;
}

std::vector<std::pair<std::int64_t, std::int64_t>> load_districts_csv(
    const std::string& activity_dir, const std::string& person_id) {
  const std::string path =
      join(activity_dir, "districts_" + sanitize_person_id(person_id) + ".csv");
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  if (!fs::exists(path)) return out;
  CsvReader in(path, {"district_id", "seconds"});
  while (in.next()) out.emplace_back(in.get_int(0), in.get_int(1));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

StageResult stage_exposure(const PipelineConfig& cfg, const std::string& activity_dir,
                           const std::string& prevalence_path,
                           const std::string& district_prevalence_path,
                           const std::string& out_dir) {
  ensure_dir(out_dir);
  const PrevalenceField field = load_prevalence_csv(prevalence_path, cfg.percent_units);
  const DistrictPrevalence dp =
      load_district_prevalence(district_prevalence_path, cfg.percent_units);
  const auto persons = load_person_summaries(activity_dir);

  StageResult res;
  AtomicFile exposure(join(out_dir, "exposure.csv"));
  exposure.stream()
      << "person_id,e_in,e_out,e_overall,e_home,fraction_in,fraction_out\n";
  AtomicFile deviations(join(out_dir, "deviations.csv"));
  deviations.stream() << "person_id,gamma,deviation\n";

  for (const auto& person : persons) {
    const auto dist = load_activity_csv(activity_dir, person.person_id, person.cpt_seconds);
    const auto districts = load_districts_csv(activity_dir, person.person_id);

    ExposureProfile profile;
    profile.person_id = person.person_id;
    if (dist) profile.e_in = exposure_in(*dist, field);
    profile.e_out = exposure_out(districts, dp);
    const std::int64_t classified = person.inside_seconds + person.outside_seconds;
    if (classified > 0) {
      profile.fraction_in =
          static_cast<double>(person.inside_seconds) / static_cast<double>(classified);
      profile.fraction_out =
          static_cast<double>(person.outside_seconds) / static_cast<double>(classified);
    } else {
      ++res.warnings;  // no classified time at all
    }
    profile.e_overall =
        exposure_overall(profile.e_in, profile.e_out, profile.fraction_in, profile.fraction_out);

    const ActivityDistribution empty_dist;
    const HomeClassification home = classify_home(dist ? *dist : empty_dist, districts);
    std::optional<ActivitySpace> home_space;
    if (home.defined) {
      if (home.inside && dist) {
        home_space = activity_space(*dist, cfg.home_gamma);
        profile.e_home = exposure_home(*dist, *home_space, field);
      } else if (!home.inside) {
        profile.e_home = dp.lookup(home.home_district);
      }
    }

    exposure.stream() << profile.person_id << ',' << fmt_value(profile.e_in, cfg.percent_units)
                      << ',' << fmt_value(profile.e_out, cfg.percent_units) << ','
                      << fmt_value(profile.e_overall, cfg.percent_units) << ','
                      << fmt_value(profile.e_home, cfg.percent_units) << ','
                      << fmt_value(profile.fraction_in, false) << ','
                      << fmt_value(profile.fraction_out, false) << "\n";
    ++res.rows;

    // Deviation curve over levels 50..95, for participants with an inside home
    // and a fully defined curve.
    if (home.defined && home.inside && dist && !is_missing(profile.e_home)) {
      std::vector<double> curve;
      curve.reserve(46);
      bool complete = true;
      for (int g = 50; g <= 95; ++g) {
        const ActivitySpace space = activity_space(*dist, static_cast<double>(g));
        const double e = exposure_over_cells(*dist, space.cells, field);
        if (is_missing(e)) {
          complete = false;
          break;
        }
        curve.push_back(e - profile.e_home);
      }
      if (complete) {
        for (int g = 50; g <= 95; ++g)
          deviations.stream() << person.person_id << ',' << g << ','
                              << fmt_value(curve[static_cast<std::size_t>(g - 50)] *
                                               (cfg.percent_units ? 100.0 : 1.0),
                                           false)
                              << "\n";
      }
    }
  }
  exposure.commit();
  deviations.commit();
  res.outputs.push_back(join(out_dir, "exposure.csv"));
  res.outputs.push_back(join(out_dir, "deviations.csv"));
  return res;
}

// --- analyze stages ------------------------------------------------------------

StageResult analyze_risk(const PipelineConfig& cfg, const std::string& exposure_path,
                         const std::string& out_path) {
  CsvReader in(exposure_path, {"person_id", "e_in", "fraction_out"});
  std::vector<std::string> order;
  std::vector<RiskInput> defined;
  std::vector<bool> is_defined;
  while (in.next()) {
    const std::string pid = in.get_string(0);
    const auto e_in = in.get_optional_double(1);
    const auto f_out = in.get_optional_double(2);
    order.push_back(pid);
    if (e_in && f_out) {
      defined.push_back(RiskInput{pid, *e_in, *f_out});
      is_defined.push_back(true);
    } else {
      is_defined.push_back(false);
    }
  }
  const auto assignments =
      risk_stratify(defined, cfg.risk_low_percentile, cfg.risk_high_percentile);
  std::unordered_map<std::string, RiskGroup> group_of;
  for (const auto& a : assignments) group_of[a.person_id] = a.group;

  StageResult res;
  AtomicFile out(out_path);
  out.stream() << "person_id,group\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto it = group_of.find(order[i]);
    const RiskGroup g = it != group_of.end() ? it->second : RiskGroup::unassigned;
    if (!is_defined[i]) ++res.warnings;
    out.stream() << order[i] << ',' << risk_group_name(g) << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

StageResult analyze_cluster(const PipelineConfig& cfg, const std::string& deviations_path,
                            const std::string& out_path) {
  CsvReader in(deviations_path, {"person_id", "gamma", "deviation"});
  std::vector<DeviationCurve> curves;
  std::unordered_map<std::string, std::size_t> index;
  while (in.next()) {
    const std::string pid = in.get_string(0);
    auto [it, inserted] = index.try_emplace(pid, curves.size());
    if (inserted) curves.push_back(DeviationCurve{pid, {}});
    curves[it->second].values.push_back(in.get_double(2));
  }
  const ClusterResult clusters = cluster_deviations(
      curves, cfg.cluster_k, cfg.seed, cfg.cluster_restarts, cfg.cluster_max_iterations);

  StageResult res;
  AtomicFile out(out_path);
  out.stream() << "person_id,label\n";
  for (const auto& [pid, label] : clusters.assignments) {
    out.stream() << pid << ',' << label << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

namespace {

struct LoadedCohortActivity {
  std::vector<ActivityDistribution> owned;
  std::map<std::string, std::vector<const ActivityDistribution*>> by_sex;  // "F"/"M"
  std::vector<const ActivityDistribution*> all;
  std::int64_t missing_demographics = 0;
};

std::map<std::string, Sex> load_participant_sexes(const std::string& path) {
  CsvReader in(path, {"person_id", "sex"});
  std::map<std::string, Sex> out;
  while (in.next()) {
    const auto sex = parse_sex(in.field(1));
    if (!sex) in.fail(1, "expected F or M");
    out[in.get_string(0)] = *sex;
  }
  return out;
}

LoadedCohortActivity load_cohort_activity(const std::string& activity_dir,
                                          const std::string& participants_path) {
  const auto sexes = load_participant_sexes(participants_path);
  const auto persons = load_person_summaries(activity_dir);
  LoadedCohortActivity out;
  out.owned.reserve(persons.size());
  for (const auto& person : persons) {
    auto dist = load_activity_csv(activity_dir, person.person_id, person.cpt_seconds);
    if (!dist) continue;
    out.owned.push_back(std::move(*dist));
  }
  // Pointers are taken after the vector stops growing.
  std::size_t i = 0;
  for (const auto& person : persons) {
    auto has =
        fs::exists(join(activity_dir, "activity_" + sanitize_person_id(person.person_id) + ".csv"));
    if (!has) continue;
    const ActivityDistribution* dist = &out.owned[i++];
    out.all.push_back(dist);
    const auto it = sexes.find(person.person_id);
    if (it == sexes.end()) {
      ++out.missing_demographics;
      continue;
    }
    out.by_sex[std::string(1, sex_code(it->second))].push_back(dist);
  }
  return out;
}

}  // namespace

StageResult analyze_coverage(const PipelineConfig& cfg, const std::string& activity_dir,
                             const std::string& participants_path, const std::string& out_path) {
  const LoadedCohortActivity cohort = load_cohort_activity(activity_dir, participants_path);
  if (cohort.by_sex.empty())
    raise(ErrorKind::insufficient_data, "no participants with demographics and activity");

  std::optional<ResampleSpec> resample;
  if (cfg.coverage_balance && cohort.by_sex.size() > 1) {
    std::int64_t smallest = std::numeric_limits<std::int64_t>::max();
    for (const auto& [name, members] : cohort.by_sex)
      smallest = std::min(smallest, static_cast<std::int64_t>(members.size()));
    resample = ResampleSpec{smallest, cfg.coverage_repetitions, cfg.seed};
  }
  const auto curves = coverage_curves(cohort.by_sex, cfg.gammas, resample, cfg.pooling);

  StageResult res;
  res.warnings = cohort.missing_demographics;
  AtomicFile out(out_path);
  out.stream() << "group,gamma,collective,mean_individual,q1,q3\n";
  for (const auto& curve : curves) {
    for (std::size_t g = 0; g < curve.gammas.size(); ++g) {
      out.stream() << curve.group << ',' << fmt_double(curve.gammas[g]) << ','
                   << fmt_double(curve.collective[g]) << ','
                   << fmt_double(curve.mean_individual[g]) << ',' << fmt_double(curve.q1[g])
                   << ',' << fmt_double(curve.q3[g]) << "\n";
      ++res.rows;
    }
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

StageResult analyze_overlap(const PipelineConfig& cfg, const std::string& activity_dir,
                            const std::string& participants_path, double gamma,
                            const std::string& out_path) {
  const LoadedCohortActivity cohort = load_cohort_activity(activity_dir, participants_path);
  const auto f = cohort.by_sex.find("F");
  const auto m = cohort.by_sex.find("M");
  if (f == cohort.by_sex.end() || m == cohort.by_sex.end())
    raise(ErrorKind::insufficient_data, "overlap needs participants of both sexes");
  const ActivitySpace space_f = activity_space(pool(f->second, cfg.pooling, "F").dist, gamma);
  const ActivitySpace space_m = activity_space(pool(m->second, cfg.pooling, "M").dist, gamma);
  const auto categories = overlap_map(space_f, space_m);

  StageResult res;
  AtomicFile out(out_path);
  out.stream() << "cell_id,category\n";
  for (const auto& [cell, category] : categories) {
    out.stream() << cell << ',' << overlap_category_name(category) << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

StageResult analyze_design([[maybe_unused]] const PipelineConfig& cfg,
                           const std::string& activity_dir,
                           const std::string& participants_path, const std::string& out_path) {
  std::map<std::string, Sex> sexes = load_participant_sexes(participants_path);
  std::map<std::string, CivilDate> births;
  {
    CsvReader in(participants_path, {"person_id", "birth_date"});
    while (in.next()) {
      const auto birth = try_parse_date(in.field(1));
      if (!birth) in.fail(1, "not an ISO-8601 date");
      births[in.get_string(0)] = *birth;
    }
  }
  std::map<std::string, std::string> anchors;
  for (const auto& person : load_person_summaries(activity_dir))
    anchors[person.person_id] = person.anchor_ts;

  StageResult res;
  AtomicFile out(out_path);
  out.stream() << "person_id,sex,age,gamma,n_cells\n";
  CsvReader in(join(activity_dir, "spaces.csv"), {"person_id", "gamma", "n_cells"});
  while (in.next()) {
    const double gamma = in.get_double(1);
    if (gamma < 50 || gamma > 95) continue;
    const std::string pid = in.get_string(0);
    const auto sex = sexes.find(pid);
    const auto birth = births.find(pid);
    const auto anchor = anchors.find(pid);
    if (sex == sexes.end() || birth == births.end() || anchor == anchors.end()) {
      ++res.warnings;
      continue;
    }
    const int age =
        age_at(birth->second, date_of_epoch_seconds(parse_datetime_utc(anchor->second)));
    out.stream() << pid << ',' << sex_code(sex->second) << ',' << age << ',' << fmt_double(gamma)
                 << ',' << in.get_int(2) << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

StageResult analyze_logmap(const PipelineConfig& cfg, const std::string& activity_dir,
                           const std::string& participants_path, const std::string& group,
                           const std::string& out_path) {
  cfg.require_grid();
  const LoadedCohortActivity cohort = load_cohort_activity(activity_dir, participants_path);
  const std::vector<const ActivityDistribution*>* members = nullptr;
  if (group == "all") {
    members = &cohort.all;
  } else {
    const auto it = cohort.by_sex.find(group);
    if (it == cohort.by_sex.end())
      raise(ErrorKind::insufficient_data, "no participants in group " + group);
    members = &it->second;
  }
  if (members->empty()) raise(ErrorKind::insufficient_data, "no activity distributions to pool");
  const ActivityDistribution pooled = pool(*members, cfg.pooling, group).dist;
  const auto values = log_activity_export(pooled, cfg.grid, cfg.plot_epsilon);

  StageResult res;
  AtomicFile out(out_path);
  out.stream() << "cell_id,log_share\n";
  for (CellId id = 0; id < cfg.grid.cell_count(); ++id) {
    out.stream() << id << ',' << fmt_double(values[static_cast<std::size_t>(id)]) << "\n";
    ++res.rows;
  }
  out.commit();
  res.outputs.push_back(out_path);
  return res;
}

// --- full pipeline ---------------------------------------------------------------

void RunManifest::write(const std::string& path) const {
  json doc;
  doc["config_hash"] = config_hash;
  doc["threads"] = threads;
  doc["seed"] = seed;
  doc["inputs"] = input_digests;
  doc["outputs"] = output_digests;
  doc["stages"] = json::array();
  for (const auto& s : stages) {
    doc["stages"].push_back(
        {{"name", s.name}, {"rows", s.rows}, {"warnings", s.warnings}, {"wall_ms", s.wall_ms}});
  }
  AtomicFile out(path);
  out.stream() << doc.dump(2) << "\n";
  out.commit();
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  const std::string out_dir = cfg.out_dir();
  ensure_dir(out_dir);

  RunManifest manifest;
  manifest.config_hash = bytes_digest_hex(cfg.canonical_json);
  manifest.threads = omp_get_max_threads();
  manifest.seed = cfg.seed;

  auto want = [&](const std::string& stage) {
    if (cfg.stages.empty()) return true;
    return std::find(cfg.stages.begin(), cfg.stages.end(), stage) != cfg.stages.end();
  };

  std::map<std::string, std::string> resolved = cfg.paths;
  auto resolve = [&](const std::string& name) {
    const auto it = resolved.find(name);
    if (it == resolved.end() || it->second.empty())
      raise(ErrorKind::config, "missing path '" + name + "'");
    return it->second;
  };

  auto run_stage = [&](const std::string& name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    StageResult result;
    try {
      result = fn();
    } catch (const Error& e) {
      raise(e.kind(), "stage " + name + ": " + e.what());
    }
    StageStats stats;
    stats.name = name;
    stats.rows = result.rows;
    stats.warnings = result.warnings;
    stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
    manifest.stages.push_back(stats);
    for (const auto& path : result.outputs) manifest.output_digests[path] = file_digest_hex(path);
  };

  if (cfg.synth && want("synth")) {
    const std::string synth_dir = join(out_dir, "synth");
    run_stage("synth", [&] { return stage_synth(cfg, synth_dir, "all"); });
    for (const char* name : {"tests", "rates", "homesteads", "residents", "fixes",
                             "participants", "district_prevalence"})
      resolved[name] = join(synth_dir, std::string(name) + ".csv");
    resolved["regions"] = join(synth_dir, "regions.geojson");
  }

  for (const auto& [name, path] : resolved) {
    if (name == "out_dir" || path.empty()) continue;
    if (fs::exists(path) && fs::is_regular_file(path))
      manifest.input_digests[path] = file_digest_hex(path);
  }

  if (want("impute"))
    run_stage("impute",
              [&] { return stage_impute(cfg, resolve("tests"), resolve("rates"), out_dir); });

  int period = 0;
  if (cfg.prevalence_period) {
    period = *cfg.prevalence_period;
  } else if (cfg.synth) {
    period = year_of_epoch_seconds(cfg.synth->trajectories.start_epoch_s);
  } else if (want("prevalence")) {
    raise(ErrorKind::config, "prevalence_period is required");
  }
  const std::string prevalence_path =
      join(out_dir, "prevalence_" + std::to_string(period) + ".csv");
  if (want("prevalence")) {
    const std::string status_path =
        resolved.count("status") && !resolved["status"].empty()
            ? resolved["status"]
            : join(out_dir, "status_" + std::to_string(cfg.status_replicate) + ".csv");
    run_stage("prevalence", [&] {
      return stage_prevalence(cfg, resolve("homesteads"), resolve("residents"), status_path,
                              period, prevalence_path);
    });
  }

  if (want("activity"))
    run_stage("activity",
              [&] { return stage_activity(cfg, resolve("fixes"), resolve("regions"), out_dir); });

  if (want("exposure"))
    run_stage("exposure", [&] {
      return stage_exposure(cfg, out_dir, prevalence_path, resolve("district_prevalence"),
                            out_dir);
    });

  if (want("analyze")) {
    run_stage("analyze.risk", [&] {
      return analyze_risk(cfg, join(out_dir, "exposure.csv"), join(out_dir, "risk.csv"));
    });
    run_stage("analyze.cluster", [&] {
      return analyze_cluster(cfg, join(out_dir, "deviations.csv"), join(out_dir, "clusters.csv"));
    });
    run_stage("analyze.coverage", [&] {
      return analyze_coverage(cfg, out_dir, resolve("participants"),
                              join(out_dir, "coverage.csv"));
    });
    run_stage("analyze.design", [&] {
      return analyze_design(cfg, out_dir, resolve("participants"),
                            join(out_dir, "design_table.csv"));
    });
    for (const double g : cfg.overlap_gammas) {
      run_stage("analyze.overlap", [&] {
        return analyze_overlap(cfg, out_dir, resolve("participants"), g,
                               join(out_dir, "overlap_" + gamma_tag(g) + ".csv"));
      });
    }
    for (const std::string& group : cfg.logmap_groups) {
      run_stage("analyze.logmap", [&] {
        return analyze_logmap(cfg, out_dir, resolve("participants"), group,
                              join(out_dir, "logmap_" + group + ".csv"));
      });
    }
  }

  manifest.write(join(out_dir, "manifest.json"));
  return manifest;
}

// --- validation ------------------------------------------------------------------

namespace {

// Scans a CSV leniently, collecting findings instead of throwing.
void scan_csv(const std::string& path, const std::vector<std::string>& columns,
              const std::function<void(const CsvReader&)>& row_check,
              std::vector<Finding>& findings) {
  std::unique_ptr<CsvReader> in;
  try {
    in = std::make_unique<CsvReader>(path, columns);
  } catch (const Error& e) {
    findings.push_back(Finding{path, 0, "", e.what()});
    return;
  }
  while (true) {
    bool more = false;
    try {
      more = in->next();
    } catch (const Error& e) {
      findings.push_back(Finding{path, in->row(), "", e.what()});
      continue;
    }
    if (!more) break;
    try {
      row_check(*in);
    } catch (const Error& e) {
      findings.push_back(Finding{path, in->row(), "", e.what()});
    }
  }
}

}  // namespace

std::vector<Finding> validate_inputs(const PipelineConfig& cfg) {
  std::vector<Finding> findings;
  const double prevalence_upper = cfg.percent_units ? 100.0 : 1.0;
  auto has = [&](const char* name) {
    const auto it = cfg.paths.find(name);
    return it != cfg.paths.end() && !it->second.empty();
  };

  if (has("tests")) {
    scan_csv(cfg.paths.at("tests"),
             {"person_id", "sex", "birth_date", "entry_date", "exit_date", "test_date", "result"},
             [](const CsvReader& in) {
               if (in.field(0).empty()) in.fail(0, "empty person_id");
               if (!parse_sex(in.field(1))) in.fail(1, "expected F or M");
               if (!try_parse_date(in.field(2))) in.fail(2, "not an ISO-8601 date");
               const auto entry = try_parse_date(in.field(3));
               if (!entry) in.fail(3, "not an ISO-8601 date");
               const auto exit = try_parse_date(in.field(4));
               if (!exit) in.fail(4, "not an ISO-8601 date");
               if (entry && exit && entry->year > exit->year)
                 in.fail(3, "entry after exit");
               if (!in.field(5).empty()) {
                 if (!try_parse_date(in.field(5))) in.fail(5, "not an ISO-8601 date");
                 if (in.field(6) != "neg" && in.field(6) != "pos")
                   in.fail(6, "expected neg or pos");
               } else if (!in.field(6).empty()) {
                 in.fail(6, "result given without test_date");
               }
             },
             findings);
    try {
      load_surveillance_records(cfg.paths.at("tests"));
    } catch (const Error& e) {
      findings.push_back(Finding{cfg.paths.at("tests"), 0, "", e.what()});
    }
  }

  if (has("rates")) {
    try {
      load_rate_table(cfg.paths.at("rates"));
    } catch (const Error& e) {
      findings.push_back(Finding{cfg.paths.at("rates"), 0, "", e.what()});
    }
  }

  if (has("fixes")) {
    scan_csv(cfg.paths.at("fixes"), {"person_id", "timestamp", "lon", "lat"},
             [](const CsvReader& in) {
               if (in.field(0).empty()) in.fail(0, "empty person_id");
               if (!try_parse_datetime_utc(in.field(1)))
                 in.fail(1, "not an ISO-8601 UTC timestamp");
               const double lon = in.get_double(2);
               const double lat = in.get_double(3);
               if (!std::isfinite(lon) || !std::isfinite(lat) || std::abs(lat) >= 90 ||
                   std::abs(lon) > 180)
                 in.fail(2, "lon/lat out of range");
             },
             findings);
  }

  if (has("homesteads")) {
    scan_csv(cfg.paths.at("homesteads"), {"homestead_id", "lon", "lat"},
             [](const CsvReader& in) {
               in.get_int(0);
               in.get_double(1);
               in.get_double(2);
             },
             findings);
  }

  if (has("residents")) {
    scan_csv(cfg.paths.at("residents"), {"person_id", "homestead_id", "period"},
             [](const CsvReader& in) {
               if (in.field(0).empty()) in.fail(0, "empty person_id");
               in.get_int(1);
               in.get_int(2);
             },
             findings);
  }

  if (has("district_prevalence")) {
    scan_csv(cfg.paths.at("district_prevalence"), {"district_id", "prevalence"},
             [&](const CsvReader& in) {
               in.get_int(0);
               const double v = in.get_double(1);
               if (!(v >= 0 && v <= prevalence_upper)) in.fail(1, "prevalence out of range");
             },
             findings);
  }

  if (has("participants")) {
    scan_csv(cfg.paths.at("participants"), {"person_id", "sex", "birth_date"},
             [](const CsvReader& in) {
               if (in.field(0).empty()) in.fail(0, "empty person_id");
               if (!parse_sex(in.field(1))) in.fail(1, "expected F or M");
               if (!try_parse_date(in.field(2))) in.fail(2, "not an ISO-8601 date");
             },
             findings);
  }

  if (has("regions")) {
    try {
      if (cfg.has_grid) load_regions(cfg.paths.at("regions"), cfg.projection);
    } catch (const Error& e) {
      findings.push_back(Finding{cfg.paths.at("regions"), 0, "", e.what()});
    }
  }

  return findings;
}

}  // namespace actex
