#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace reem {

/// Seconds since 1970-01-01T00:00:00, no time zone.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour = 0, unsigned minute = 0);
std::string format_iso8601(Timestamp t);
/// Accepts YYYY-MM-DDTHH:MM[:SS].
Timestamp parse_iso8601(std::string_view text);

/// Hours since local midnight, in [0, 24).
double hour_of_day(Timestamp t);
bool is_weekend(Timestamp t);

}  // namespace reem
