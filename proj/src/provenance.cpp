#include "gee/provenance.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>

namespace gee {

bool reproducible_mode() { return std::getenv("SOURCE_DATE_EPOCH") != nullptr; }

std::string iso_timestamp_now() {
  std::time_t now;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    now = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buffer;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  if (reproducible_mode()) return 0.0;
  const auto delta = std::chrono::steady_clock::now() - start;
  return std::chrono::duration<double>(delta).count();
}

}  // namespace gee
