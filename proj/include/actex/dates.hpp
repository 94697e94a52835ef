#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace actex {

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

// Days since 1970-01-01 (proleptic Gregorian).
std::int64_t days_from_civil(CivilDate d);
CivilDate civil_from_days(std::int64_t z);

// Strict "YYYY-MM-DD".
std::optional<CivilDate> try_parse_date(std::string_view s);
CivilDate parse_date(std::string_view s);  // throws schema error

// Strict "YYYY-MM-DDTHH:MM:SSZ" -> epoch seconds (UTC).
std::optional<std::int64_t> try_parse_datetime_utc(std::string_view s);
std::int64_t parse_datetime_utc(std::string_view s);  // throws schema error

std::string format_date(CivilDate d);
std::string format_datetime_utc(std::int64_t epoch_seconds);

CivilDate date_of_epoch_seconds(std::int64_t epoch_seconds);
int year_of_epoch_seconds(std::int64_t epoch_seconds);

// Completed years from `birth` to `ref`.
int age_at(CivilDate birth, CivilDate ref);

}  // namespace actex
