#pragma once

#include <chrono>
#include <string>

namespace gee {

/// True when SOURCE_DATE_EPOCH is set; output artifacts then carry
/// reproducible timestamps and zeroed elapsed times so identical runs are
/// byte-identical.
bool reproducible_mode();

/// ISO-8601 UTC timestamp; taken from SOURCE_DATE_EPOCH when set.
std::string iso_timestamp_now();

/// Wall seconds since `start`, or 0.0 in reproducible mode.
double elapsed_seconds(std::chrono::steady_clock::time_point start);

}  // namespace gee
