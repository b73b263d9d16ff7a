#include "gee/cache.hpp"

#include <nlohmann/json.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>

namespace gee {

using nlohmann::json;

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    std::fprintf(stderr, "warning: cannot create cache directory %s: %s\n", dir_.string().c_str(),
                 ec.message().c_str());
  }
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const auto path = dir_ / key;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    misses_.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  try {
    json entry;
    in >> entry;
    auto text = entry.at("text").get<std::string>();
    hits_.fetch_add(1, std::memory_order_relaxed);
    return text;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: unreadable cache entry %s: %s\n", path.string().c_str(), e.what());
    misses_.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const std::string& text) const {
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  const json entry = {{"request_digest", key}, {"text", text}, {"timestamp", now}};
  const auto path = dir_ / key;
  // Temp-file rename keeps concurrent readers away from partial writes;
  // identical keys always carry identical values, so last-write-wins is safe.
  const auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()));
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open for writing");
      out << entry.dump();
      if (!out) throw std::runtime_error("short write");
    }
    std::filesystem::rename(tmp, path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: cache write failed for %s: %s\n", path.string().c_str(), e.what());
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
  }
}

std::unique_lock<std::mutex> ResponseCache::lock_key(const std::string& key) const {
  std::mutex* lock = nullptr;
  {
    std::lock_guard<std::mutex> guard(key_locks_mutex_);
    auto& slot = key_locks_[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    lock = slot.get();
  }
  return std::unique_lock<std::mutex>(*lock);
}

double ResponseCache::hit_rate() const {
  const auto h = hits();
  const auto total = h + misses();
  return total == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(total);
}

CompletionResponse cached_complete(const ResponseCache* cache, Backend& backend,
                                   const CompletionRequest& request) {
  if (cache == nullptr) return backend.complete(request);
  const auto key = request_cache_key(backend.id(), request);
  const auto key_guard = cache->lock_key(key);
  if (auto stored = cache->get(key)) {
    CompletionResponse response;
    response.text = std::move(*stored);
    response.backend_id = backend.id();
    response.cached = true;
    return response;
  }
  auto response = backend.complete(request);
  cache->put(key, response.text);
  return response;
}

}  // namespace gee
