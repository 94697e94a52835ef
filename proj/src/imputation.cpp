#include "actex/imputation.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "actex/csv.hpp"
#include "actex/error.hpp"

namespace actex {

std::optional<Sex> parse_sex(std::string_view s) {
  if (s == "F" || s == "f") return Sex::female;
  if (s == "M" || s == "m") return Sex::male;
  return std::nullopt;
}

void SurveillanceRecord::validate() const {
  if (entry_period > exit_period)
    raise(ErrorKind::record, "person " + person_id + ": entry period after exit period");
  std::optional<int> first_pos;
  for (const auto& t : tests) {
    if (t.period < entry_period || t.period > exit_period)
      raise(ErrorKind::record, "person " + person_id + ": test at period " +
                                   std::to_string(t.period) + " outside [entry, exit]");
    if (t.positive && (!first_pos || t.period < *first_pos)) first_pos = t.period;
  }
  if (first_pos) {
    for (const auto& t : tests) {
      if (!t.positive && t.period >= *first_pos)
        raise(ErrorKind::record,
              "person " + person_id + ": negative test at period " + std::to_string(t.period) +
                  " not before the earliest positive test (period " + std::to_string(*first_pos) +
                  ")");
    }
  }
}

std::optional<int> SurveillanceRecord::last_negative_period() const {
  std::optional<int> out;
  for (const auto& t : tests)
    if (!t.positive && (!out || t.period > *out)) out = t.period;
  return out;
}

std::optional<int> SurveillanceRecord::first_positive_period() const {
  std::optional<int> out;
  for (const auto& t : tests)
    if (t.positive && (!out || t.period < *out)) out = t.period;
  return out;
}

int SurveillanceRecord::age_at_period(int period) const {
  return age_at(birth, CivilDate{period, 1, 1});
}

void RateTable::insert(Sex sex, int age_lo, int age_hi, int period, Rates rates) {
  if (age_lo > age_hi) raise(ErrorKind::schema, "age group with lo > hi");
  if (!(rates.prevalence >= 0 && rates.prevalence <= 1))
    raise(ErrorKind::schema, "prevalence outside [0, 1]");
  if (!(rates.incidence >= 0 && rates.incidence <= 1))
    raise(ErrorKind::schema, "incidence outside [0, 1]");
  auto& bands = bands_[static_cast<int>(sex)];
  std::size_t band_idx = bands.size();
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (bands[i].lo == age_lo && bands[i].hi == age_hi) {
      band_idx = i;
      break;
    }
  }
  if (band_idx == bands.size()) bands.push_back(Band{age_lo, age_hi});
  const auto key = std::make_tuple(static_cast<int>(sex), band_idx, period);
  if (cells_.count(key)) raise(ErrorKind::schema, "duplicate rate table entry");
  cells_[key] = rates;
  finalized_ = false;
}

std::optional<std::size_t> RateTable::band_of(Sex sex, int age) const {
  const auto& bands = bands_[static_cast<int>(sex)];
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (age >= bands[i].lo && age <= bands[i].hi) return i;
  return std::nullopt;
}

void RateTable::finalize() {
  for (int s = 0; s < 2; ++s) {
    const auto& bands = bands_[s];
    for (std::size_t i = 0; i < bands.size(); ++i) {
      for (std::size_t j = i + 1; j < bands.size(); ++j) {
        if (bands[i].lo <= bands[j].hi && bands[j].lo <= bands[i].hi)
          raise(ErrorKind::schema, "overlapping age groups in rate table");
      }
    }
  }
  // Coherence along cohort trajectories: a person aged a-1 in period p-1 is
  // aged a in period p. Violations would push Eq.-style backward sampling
  // probabilities above 1, so they are a hard ingestion error, not a clamp.
  for (const auto& [key, rates] : cells_) {
    const auto [sex, band_idx, period] = key;
    const auto& band = bands_[sex][band_idx];
    for (int age = band.lo; age <= band.hi; ++age) {
      const auto prev_band = band_of(static_cast<Sex>(sex), age - 1);
      if (!prev_band) continue;
      const auto it = cells_.find(std::make_tuple(sex, *prev_band, period - 1));
      if (it == cells_.end()) continue;
      const double mu_prev = it->second.prevalence;
      if (rates.prevalence + 1e-12 < rates.incidence * (1.0 - mu_prev))
        raise(ErrorKind::incoherent_rate_table,
              "rate table incoherent for sex " + std::string(1, sex_code(static_cast<Sex>(sex))) +
                  ", age " + std::to_string(age) + ", period " + std::to_string(period) +
                  ": prevalence " + fmt_double(rates.prevalence) + " < incidence * (1 - " +
                  fmt_double(mu_prev) + ")");
    }
  }
  finalized_ = true;
}

Rates RateTable::lookup(Sex sex, int age, int period) const {
  const auto band = band_of(sex, age);
  if (band) {
    const auto it = cells_.find(std::make_tuple(static_cast<int>(sex), *band, period));
    if (it != cells_.end()) return it->second;
  }
  raise(ErrorKind::incomplete_rate_table,
        std::string("no rate for sex ") + sex_code(sex) + ", age " + std::to_string(age) +
            ", period " + std::to_string(period));
}

RateTable load_rate_table(const std::string& path) {
  CsvReader in(path, {"sex", "age_group", "period", "prevalence", "incidence"});
  RateTable table;
  while (in.next()) {
    const auto sex = parse_sex(in.field(0));
    if (!sex) in.fail(0, "expected F or M");
    const std::string group = in.get_string(1);
    const auto dash = group.find('-');
    if (dash == std::string::npos) in.fail(1, "expected lo-hi age group");
    int lo = 0, hi = 0;
    try {
      lo = std::stoi(group.substr(0, dash));
      hi = std::stoi(group.substr(dash + 1));
    } catch (const std::exception&) {
      in.fail(1, "expected lo-hi age group");
    }
    const auto period = static_cast<int>(in.get_int(2));
    const double mu = in.get_double(3);
    const double lambda = in.get_double(4);
    if (!(mu >= 0 && mu <= 1)) in.fail(3, "prevalence outside [0, 1]");
    if (!(lambda >= 0 && lambda <= 1)) in.fail(4, "incidence outside [0, 1]");
    try {
      table.insert(*sex, lo, hi, period, Rates{mu, lambda});
    } catch (const Error& e) {
      in.fail_row(e.what());
    }
  }
  table.finalize();
  return table;
}

double backward_negative_prob(double mu_prev, double mu_cur, double lambda_cur) {
  if (!(mu_cur > 0))
    raise(ErrorKind::degenerate_rate, "backward sampling requires positive current prevalence");
  const double p = (1.0 - mu_prev) / mu_cur * lambda_cur;
  if (p > 1.0 + 1e-12)
    raise(ErrorKind::incoherent_rate_table,
          "backward probability " + fmt_double(p) + " exceeds 1; rate table incoherent");
  return std::min(p, 1.0);
}

double bridge_positive_prob(double lambda_prev, double lambda_cur) {
  if (lambda_prev <= 0 && lambda_cur <= 0)
    raise(ErrorKind::impossible_observation,
          "positive after a negative two periods earlier, but both incidences are 0");
  return lambda_prev / (lambda_prev + lambda_cur * (1.0 - lambda_prev));
}

namespace {

constexpr std::uint8_t kUnknown = 0xFF;

struct Lookup {
  const SurveillanceRecord& rec;
  const RateTable& rates;
  Rates at(int period) const { return rates.lookup(rec.sex, rec.age_at_period(period), period); }
};

// Forward pass over [from, to]: each period is negative until a Bernoulli
// draw on the period's incidence comes up positive, after which the person
// stays positive.
void forward_fill(std::vector<std::uint8_t>& status, int entry, int from, int to,
                  const Lookup& lk, RngStream& rng) {
  bool positive = false;
  for (int t = from; t <= to; ++t) {
    auto& slot = status[static_cast<std::size_t>(t - entry)];
    if (positive) {
      slot = 1;
      continue;
    }
    slot = rng.bernoulli(lk.at(t).incidence) ? 1 : 0;
    positive = slot == 1;
  }
}

// Backward pass over [to, from] given a positive at from+1: keep drawing
// "negative at t given positive at t+1"; once negative, everything earlier is
// negative too.
void backward_fill(std::vector<std::uint8_t>& status, int entry, int from, int to,
                   const Lookup& lk, RngStream& rng) {
  bool negative = false;
  for (int t = from; t >= to; --t) {
    auto& slot = status[static_cast<std::size_t>(t - entry)];
    if (negative) {
      slot = 0;
      continue;
    }
    const Rates cur = lk.at(t + 1);
    const Rates prev = lk.at(t);
    const double p_neg = backward_negative_prob(prev.prevalence, cur.prevalence, cur.incidence);
    slot = rng.bernoulli(p_neg) ? 0 : 1;
    negative = slot == 0;
  }
}

}  // namespace

StatusSequence impute_participant(const SurveillanceRecord& rec, const RateTable& rates,
                                  RngStream& rng) {
  rec.validate();
  const int entry = rec.entry_period;
  const int exit = rec.exit_period;
  const auto n = static_cast<std::size_t>(exit - entry + 1);
  std::vector<std::uint8_t> status(n, kUnknown);
  const Lookup lk{rec, rates};

  const auto last_neg = rec.last_negative_period();
  const auto first_pos = rec.first_positive_period();
  // Monotone closure of the observed tests.
  if (last_neg)
    for (int t = entry; t <= *last_neg; ++t) status[static_cast<std::size_t>(t - entry)] = 0;
  if (first_pos)
    for (int t = *first_pos; t <= exit; ++t) status[static_cast<std::size_t>(t - entry)] = 1;

  if (!last_neg && !first_pos) {
    // Never tested: prevalence seeds the first period, incidence drives the rest.
    status[0] = rng.bernoulli(lk.at(entry).prevalence) ? 1 : 0;
    if (status[0] == 1) {
      std::fill(status.begin(), status.end(), 1);
    } else {
      forward_fill(status, entry, entry + 1, exit, lk, rng);
    }
  } else if (last_neg && !first_pos) {
    forward_fill(status, entry, *last_neg + 1, exit, lk, rng);
  } else if (first_pos && !last_neg) {
    backward_fill(status, entry, *first_pos - 1, entry, lk, rng);
  } else if (*first_pos - *last_neg > 1) {
    // Tested negative then positive: sweep backward from the first positive.
    // The final unknown period, whose left neighbor is the observed negative,
    // is bridged with the two-sided probability; this reproduces the exact
    // conditional law of the monotone chain between the two tests when the
    // rate table is Markov-consistent.
    const int bridge_t = *last_neg + 1;
    bool negative = false;
    for (int t = *first_pos - 1; t > bridge_t; --t) {
      auto& slot = status[static_cast<std::size_t>(t - entry)];
      if (negative) {
        slot = 0;
        continue;
      }
      const Rates cur = lk.at(t + 1);
      const Rates prev = lk.at(t);
      slot = rng.bernoulli(backward_negative_prob(prev.prevalence, cur.prevalence, cur.incidence))
                 ? 0
                 : 1;
      negative = slot == 0;
    }
    auto& bridge_slot = status[static_cast<std::size_t>(bridge_t - entry)];
    if (negative) {
      bridge_slot = 0;
    } else {
      const double p_pos =
          bridge_positive_prob(lk.at(bridge_t).incidence, lk.at(bridge_t + 1).incidence);
      bridge_slot = rng.bernoulli(p_pos) ? 1 : 0;
    }
  }

  StatusSequence out{rec.person_id, entry, std::move(status)};
  for (std::size_t i = 0; i < out.status.size(); ++i) {
    if (out.status[i] == kUnknown)
      raise(ErrorKind::record, "person " + rec.person_id + ": period left unimputed");
    if (i > 0 && out.status[i] < out.status[i - 1])
      raise(ErrorKind::record, "person " + rec.person_id + ": non-monotone imputation");
  }
  return out;
}

std::vector<std::vector<StatusSequence>> impute_cohort(
    const std::vector<SurveillanceRecord>& records, const RateTable& rates, std::uint64_t seed,
    int replicates) {
  if (replicates < 1) raise(ErrorKind::invalid_argument, "replicates must be >= 1");
  std::vector<std::vector<StatusSequence>> out(static_cast<std::size_t>(replicates));
  for (auto& v : out) v.resize(records.size());

  std::string first_error;
  ErrorKind first_error_kind{};
  bool failed = false;
  for (int r = 0; r < replicates; ++r) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(records.size()); ++i) {
      if (failed) continue;
      const auto& rec = records[static_cast<std::size_t>(i)];
      try {
        RngStream rng(derive_stream_seed(seed, static_cast<std::uint64_t>(r + 1), rec.person_id));
        out[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
            impute_participant(rec, rates, rng);
      } catch (const Error& e) {
#pragma omp critical
        if (!failed) {
          failed = true;
          first_error_kind = e.kind();
          first_error = "person " + rec.person_id + ": " + e.what();
        }
      }
    }
    if (failed) raise(first_error_kind, first_error);
  }
  return out;
}

}  // namespace actex
