#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace windguard {

/// Seconds since 1970-01-01T00:00:00Z.
using UnixSeconds = std::int64_t;

inline constexpr UnixSeconds kHour = 3600;

/// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|±HH:MM)". Fractional seconds are truncated.
std::optional<UnixSeconds> parse_rfc3339(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(UnixSeconds t);

/// Floor to the start of the containing UTC hour.
inline UnixSeconds floor_hour(UnixSeconds t) {
  const UnixSeconds r = t % kHour;
  return r < 0 ? t - r - kHour : t - r;
}

}  // namespace windguard
