#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "gee/backend.hpp"

namespace gee {

/// Content-addressed response store: one file per key under `dir`, filename
/// = hex hash, content = JSON {request_digest, text, timestamp}. I/O failures
/// degrade to uncached operation with a warning on stderr.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& text) const;

  /// Serializes in-process work on one key, so concurrent identical misses
  /// collapse into a single backend call.
  std::unique_lock<std::mutex> lock_key(const std::string& key) const;

  const std::filesystem::path& dir() const { return dir_; }
  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }
  double hit_rate() const;

 private:
  std::filesystem::path dir_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
  mutable std::mutex key_locks_mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<std::mutex>> key_locks_;
};

/// Cache-through completion: hit returns the stored text with cached=true
/// and no backend call; miss calls the backend and stores the result.
/// A null cache is a plain passthrough.
CompletionResponse cached_complete(const ResponseCache* cache, Backend& backend,
                                   const CompletionRequest& request);

}  // namespace gee
