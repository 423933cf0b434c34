#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace gridsense {

using Microseconds = std::chrono::microseconds;
/// UTC instant with microsecond resolution.
using Timestamp = std::chrono::sys_time<Microseconds>;

/// Parses an RFC 3339 timestamp ("2020-07-10T14:03:00.033333Z",
/// "2020-07-10 14:03:00+02:00"). Fractions beyond microseconds are truncated.
/// Returns nullopt on malformed input.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS.ffffffZ".
std::string format_rfc3339(Timestamp t);

/// Seconds between two instants as a double.
inline double seconds_between(Timestamp from, Timestamp to) {
    return static_cast<double>((to - from).count()) * 1e-6;
}

inline Timestamp add_seconds(Timestamp t, double seconds) {
    return t + Microseconds(static_cast<long long>(std::llround(seconds * 1e6)));
}

}  // namespace gridsense
