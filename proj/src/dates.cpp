#include "actex/dates.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "actex/error.hpp"

namespace actex {

namespace {

bool parse_int_field(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[static_cast<std::size_t>(m - 1)];
}

}  // namespace

std::int64_t days_from_civil(CivilDate d) {
  // Howard Hinnant's algorithm.
  const int y = d.year - (d.month <= 2);
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(d.month + (d.month > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(d.day) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned month = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (month <= 2)), static_cast<int>(month),
                   static_cast<int>(day)};
}

std::optional<CivilDate> try_parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  CivilDate d;
  if (!parse_int_field(s.substr(0, 4), d.year) || !parse_int_field(s.substr(5, 2), d.month) ||
      !parse_int_field(s.substr(8, 2), d.day))
    return std::nullopt;
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    return std::nullopt;
  return d;
}

CivilDate parse_date(std::string_view s) {
  auto d = try_parse_date(s);
  if (!d) raise(ErrorKind::schema, "not an ISO-8601 date (YYYY-MM-DD): '" + std::string(s) + "'");
  return *d;
}

std::optional<std::int64_t> try_parse_datetime_utc(std::string_view s) {
  if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z')
    return std::nullopt;
  auto date = try_parse_date(s.substr(0, 10));
  if (!date) return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_int_field(s.substr(11, 2), hh) || !parse_int_field(s.substr(14, 2), mm) ||
      !parse_int_field(s.substr(17, 2), ss))
    return std::nullopt;
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) return std::nullopt;
  return days_from_civil(*date) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::int64_t parse_datetime_utc(std::string_view s) {
  auto t = try_parse_datetime_utc(s);
  if (!t)
    raise(ErrorKind::schema,
          "not an ISO-8601 UTC timestamp (YYYY-MM-DDTHH:MM:SSZ): '" + std::string(s) + "'");
  return *t;
}

std::string format_date(CivilDate d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::string format_datetime_utc(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  const CivilDate d = civil_from_days(days);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", d.year, d.month, d.day,
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                static_cast<int>(sod % 60));
  return buf;
}

CivilDate date_of_epoch_seconds(std::int64_t t) {
  std::int64_t days = t / 86400;
  if (t % 86400 < 0) --days;
  return civil_from_days(days);
}

int year_of_epoch_seconds(std::int64_t t) { return date_of_epoch_seconds(t).year; }

int age_at(CivilDate birth, CivilDate ref) {
  int age = ref.year - birth.year;
  if (ref.month < birth.month || (ref.month == birth.month && ref.day < birth.day)) --age;
  return age;
}

}  // namespace actex
