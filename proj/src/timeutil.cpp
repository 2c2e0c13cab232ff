#include "reem/timeutil.hpp"

#include "reem/errors.hpp"

#include <chrono>
#include <cstdio>

namespace reem {

namespace {

std::chrono::sys_days day_of(Timestamp t) {
  const Timestamp days = (t >= 0 ? t : t - kSecondsPerDay + 1) / kSecondsPerDay;
  return std::chrono::sys_days{std::chrono::days{days}};
}

}  // namespace

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour, unsigned minute) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw ContractViolation("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay + hour * 3600 + minute * 60;
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto d = day_of(t);
  const year_month_day ymd{d};
  const auto secs = static_cast<unsigned>(t - d.time_since_epoch().count() * kSecondsPerDay) % 86400u;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), secs / 3600,
                secs / 60 % 60, secs % 60);
  return buf;
}

Timestamp parse_iso8601(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string str(text);
  const int n = std::sscanf(str.c_str(), "%d-%u-%uT%u:%u:%u", &y, &mo, &d, &h, &mi, &s);
  if (n < 5 || h > 23 || mi > 59 || s > 59) throw ContractViolation("bad ISO-8601 timestamp '" + str + "'");
  return make_timestamp(y, mo, d, h, mi) + s;
}

double hour_of_day(Timestamp t) {
  const Timestamp secs = t - day_of(t).time_since_epoch().count() * kSecondsPerDay;
  return static_cast<double>(secs) / 3600.0;
}

bool is_weekend(Timestamp t) {
  const std::chrono::weekday wd{day_of(t)};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

}  // namespace reem
