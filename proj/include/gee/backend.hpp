#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gee {

enum class Role { System, User, Assistant };

std::string role_name(Role role);
Role role_from_name(const std::string& name);

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct CompletionRequest {
  std::string model_name;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_output_tokens = 1024;

  friend bool operator==(const CompletionRequest&, const CompletionRequest&) = default;
};

nlohmann::json request_to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const nlohmann::json& j);

/// Content hash over (backend_id, model, messages, temperature,
/// max_output_tokens); stable across serialize/parse round trips.
std::string request_cache_key(const std::string& backend_id, const CompletionRequest& request);

struct CompletionResponse {
  std::string text;  // raw model output, untrimmed
  std::string backend_id;
  bool cached = false;
};

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, int status = 0, bool retryable = false)
      : std::runtime_error(what), status_(status), retryable_(retryable) {}

  int status() const { return status_; }
  bool retryable() const { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  virtual const std::string& id() const = 0;
};

// ---------------------------------------------------------------------------
// Mock backends (deterministic, offline)
// ---------------------------------------------------------------------------

struct MockSpec {
  enum class Kind { EchoLastUser, Fixed, Fixture, RegexTable };

  Kind kind = Kind::EchoLastUser;
  std::string fixed_text;
  std::map<std::string, std::string> fixture;  // exact rendered prompt -> response
  bool strict = false;                         // fixture miss -> error
  std::optional<std::string> default_response;
  std::vector<std::pair<std::string, std::string>> regex_rules;  // pattern -> replacement

  static MockSpec echo_last_user();
  static MockSpec fixed(std::string text);
  /// JSON object mapping prompt -> response; "__default__" key, when present,
  /// answers unmatched prompts, otherwise strict mode applies.
  static MockSpec fixture_from_file(const std::filesystem::path& path);
  /// JSON array of {"pattern", "response"} rules matched in order against the
  /// last user message; "$1".."$9" in the response expand capture groups.
  static MockSpec regex_table_from_file(const std::filesystem::path& path);
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockSpec spec, std::string id = "mock");

  CompletionResponse complete(const CompletionRequest& request) override;
  const std::string& id() const override { return id_; }

 private:
  MockSpec spec_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Remote chat-completions backend
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1000};
  double multiplier = 2.0;
};

struct RemoteConfig {
  std::string base_url;  // e.g. http://host:port/v1
  std::string api_key;
  RetryPolicy retry;
  int max_in_flight = 4;
  std::string id = "remote";
};

/// POSTs {model, messages, temperature, max_tokens} to
/// `<base_url>/chat/completions` and returns the first choice's message
/// content. Retries 408/429/5xx and transport errors with exponential
/// backoff; other statuses are terminal.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  CompletionResponse complete(const CompletionRequest& request) override;
  const std::string& id() const override { return id_; }

  /// Total retried attempts across calls (observability).
  std::uint64_t retries() const;

  /// POST <base_url>/embeddings with {model, input}; returns the first
  /// embedding. Shares the retry policy and in-flight limit.
  std::vector<float> embed(const std::string& model, const std::string& text);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string id_;
};

struct BackendChoice {
  std::shared_ptr<Backend> backend;
  std::string model_name;
};

/// Parses a backend spec string:
///   mock:echo | mock:fixed:<text> | mock:fixture:<path> | mock:regex:<path>
///   remote:<model>
BackendChoice make_backend(const std::string& spec, const RemoteConfig& remote);

}  // namespace gee
