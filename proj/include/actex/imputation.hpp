#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "actex/dates.hpp"
#include "actex/rng.hpp"

namespace actex {

enum class Sex : std::uint8_t { female, male };

inline char sex_code(Sex s) { return s == Sex::female ? 'F' : 'M'; }
std::optional<Sex> parse_sex(std::string_view s);

struct TestObservation {
  int period;
  bool positive;
};

// One surveillance participant: exposure window in period (calendar-year)
// indices plus the valid test history.
struct SurveillanceRecord {
  std::string person_id;
  Sex sex = Sex::female;
  CivilDate birth;
  int entry_period = 0;
  int exit_period = 0;
  std::vector<TestObservation> tests;  // sorted by period

  // Rejects records whose tests violate monotone seroconversion (a negative
  // test at or after the earliest positive) or fall outside [entry, exit].
  void validate() const;

  std::optional<int> last_negative_period() const;
  std::optional<int> first_positive_period() const;
  int age_at_period(int period) const;  // age at the period start (Jan 1)
};

struct Rates {
  double prevalence = 0;  // mu_t
  double incidence = 0;   // lambda_t
};

// (sex, age group, period) -> (prevalence, incidence). Age groups are closed
// integer ranges [lo, hi] and may not overlap within a sex.
class RateTable {
 public:
  void insert(Sex sex, int age_lo, int age_hi, int period, Rates rates);
  // Sorts bands, rejects overlaps, and runs the coherence check
  // mu_t >= lambda_t * (1 - mu_{t-1}) along every sex x cohort-age trajectory,
  // which guarantees the backward sampling probability never exceeds 1.
  void finalize();

  Rates lookup(Sex sex, int age, int period) const;  // throws incomplete_rate_table
  bool empty() const { return cells_.empty(); }

 private:
  struct Band {
    int lo, hi;
  };
  std::optional<std::size_t> band_of(Sex sex, int age) const;
  std::vector<Band> bands_[2];
  std::map<std::tuple<int, std::size_t, int>, Rates> cells_;  // (sex, band, period)
  bool finalized_ = false;
};

RateTable load_rate_table(const std::string& path);

// Pr(negative at t-1 | positive at t) = ((1 - mu_{t-1}) / mu_t) * lambda_t.
double backward_negative_prob(double mu_prev, double mu_cur, double lambda_cur);

// Pr(positive at t-1 | negative at t-2, positive at t), evaluated in the
// rearranged form lambda_{t-1} / (lambda_{t-1} + lambda_t * (1 - lambda_{t-1}))
// which is stable at small incidences.
double bridge_positive_prob(double lambda_prev, double lambda_cur);

struct StatusSequence {
  std::string person_id;
  int entry_period = 0;
  std::vector<std::uint8_t> status;  // status[t - entry_period] in {0, 1}

  int exit_period() const { return entry_period + static_cast<int>(status.size()) - 1; }
  std::uint8_t at(int period) const { return status[static_cast<std::size_t>(period - entry_period)]; }
};

// One imputed status path consistent with every observed test, monotone in t.
StatusSequence impute_participant(const SurveillanceRecord& rec, const RateTable& rates,
                                  RngStream& rng);

// replicates independent imputed datasets; the randomness of each participant
// is derived from (seed, replicate, person_id) only.
std::vector<std::vector<StatusSequence>> impute_cohort(
    const std::vector<SurveillanceRecord>& records, const RateTable& rates, std::uint64_t seed,
    int replicates);

}  // namespace actex
