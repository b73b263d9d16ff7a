#include "gee/backend.hpp"

// httplib must see the OpenSSL define before inclusion.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <regex>
#include <semaphore>
#include <thread>

#include "gee/sha256.hpp"

namespace gee {

using nlohmann::json;

std::string role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  throw std::logic_error("bad role");
}

Role role_from_name(const std::string& name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw std::invalid_argument("unknown message role: " + name);
}

json request_to_json(const CompletionRequest& request) {
  json messages = json::array();
  for (const auto& message : request.messages) {
    messages.push_back({{"role", role_name(message.role)}, {"content", message.content}});
  }
  return json{{"model", request.model_name},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};
}

CompletionRequest request_from_json(const json& j) {
  CompletionRequest request;
  request.model_name = j.at("model").get<std::string>();
  request.temperature = j.at("temperature").get<double>();
  request.max_output_tokens = j.at("max_tokens").get<int>();
  for (const auto& m : j.at("messages")) {
    request.messages.push_back(
        {role_from_name(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return request;
}

std::string request_cache_key(const std::string& backend_id, const CompletionRequest& request) {
  json key = request_to_json(request);
  key["backend_id"] = backend_id;
  return sha256_hex(key.dump());
}

namespace {

const Message* last_user_message(const CompletionRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::User) return &*it;
  }
  return nullptr;
}

void require_user_message(const CompletionRequest& request) {
  if (last_user_message(request) == nullptr) {
    throw BackendError("completion request has no user message");
  }
}

}  // namespace

// --- mock -------------------------------------------------------------------

MockSpec MockSpec::echo_last_user() {
  MockSpec spec;
  spec.kind = Kind::EchoLastUser;
  return spec;
}

MockSpec MockSpec::fixed(std::string text) {
  MockSpec spec;
  spec.kind = Kind::Fixed;
  spec.fixed_text = std::move(text);
  return spec;
}

MockSpec MockSpec::fixture_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mock fixture: " + path.string());
  json table;
  try {
    in >> table;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed mock fixture " + path.string() + ": " + e.what());
  }
  if (!table.is_object()) throw std::runtime_error("mock fixture must be a JSON object");
  MockSpec spec;
  spec.kind = Kind::Fixture;
  spec.strict = true;
  for (const auto& [prompt, response] : table.items()) {
    if (prompt == "__default__") {
      spec.default_response = response.get<std::string>();
      spec.strict = false;
    } else {
      spec.fixture[prompt] = response.get<std::string>();
    }
  }
  return spec;
}

MockSpec MockSpec::regex_table_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mock regex table: " + path.string());
  json rules;
  try {
    in >> rules;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed mock regex table " + path.string() + ": " + e.what());
  }
  if (!rules.is_array()) throw std::runtime_error("mock regex table must be a JSON array");
  MockSpec spec;
  spec.kind = Kind::RegexTable;
  for (const auto& rule : rules) {
    spec.regex_rules.emplace_back(rule.at("pattern").get<std::string>(),
                                  rule.at("response").get<std::string>());
  }
  return spec;
}

MockBackend::MockBackend(MockSpec spec, std::string id) : spec_(std::move(spec)), id_(std::move(id)) {
  if (spec_.kind == MockSpec::Kind::RegexTable) {
    for (const auto& [pattern, response] : spec_.regex_rules) {
      std::regex probe(pattern);  // fail at construction, not first call
      (void)probe;
      (void)response;
    }
  }
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
  require_user_message(request);
  const std::string& prompt = last_user_message(request)->content;
  CompletionResponse response;
  response.backend_id = id_;
  switch (spec_.kind) {
    case MockSpec::Kind::EchoLastUser:
      response.text = prompt;
      return response;
    case MockSpec::Kind::Fixed:
      response.text = spec_.fixed_text;
      return response;
    case MockSpec::Kind::Fixture: {
      const auto it = spec_.fixture.find(prompt);
      if (it != spec_.fixture.end()) {
        response.text = it->second;
        return response;
      }
      if (spec_.default_response) {
        response.text = *spec_.default_response;
        return response;
      }
      throw BackendError("mock fixture has no entry for prompt sha256:" + sha256_hex(prompt));
    }
    case MockSpec::Kind::RegexTable: {
      for (const auto& [pattern, replacement] : spec_.regex_rules) {
        std::regex re(pattern);
        std::smatch match;
        if (std::regex_search(prompt, match, re)) {
          response.text = match.format(replacement);
          return response;
        }
      }
      if (spec_.default_response) {
        response.text = *spec_.default_response;
        return response;
      }
      throw BackendError("mock regex table matched no rule for prompt sha256:" + sha256_hex(prompt));
    }
  }
  throw std::logic_error("bad mock kind");
}

// --- remote ------------------------------------------------------------------

namespace {

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path_prefix;
};

ParsedUrl split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("base url must include a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

std::string body_excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  if (body.size() <= kMax) return body;
  return body.substr(0, kMax) + "...";
}

}  // namespace

struct RemoteBackend::Impl {
  RemoteConfig config;
  ParsedUrl url;
  std::counting_semaphore<64> in_flight;
  std::atomic<std::uint64_t> retries{0};

  explicit Impl(RemoteConfig cfg)
      : config(std::move(cfg)),
        url(split_base_url(config.base_url)),
        in_flight(std::max(1, std::min(64, config.max_in_flight))) {}

  json post_json(const std::string& endpoint, const json& body) {
    in_flight.acquire();
    struct Release {
      std::counting_semaphore<64>& sem;
      ~Release() { sem.release(); }
    } release{in_flight};

    httplib::Headers headers;
    if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
    const std::string payload = body.dump();
    const std::string path = url.path_prefix + endpoint;

    auto delay = config.retry.initial_delay;
    std::string last_error;
    for (int attempt = 1; attempt <= config.retry.max_attempts; ++attempt) {
      httplib::Client client(url.host_port);
      client.set_read_timeout(120, 0);
      client.set_connection_timeout(10, 0);
      auto result = client.Post(path, headers, payload, "application/json");
      if (result) {
        if (result->status >= 200 && result->status < 300) {
          json parsed = json::parse(result->body, nullptr, false);
          if (parsed.is_discarded()) {
            throw BackendError("malformed JSON in backend response: " + body_excerpt(result->body));
          }
          return parsed;
        }
        last_error = "HTTP " + std::to_string(result->status) + ": " + body_excerpt(result->body);
        if (!retryable_status(result->status)) {
          throw BackendError(last_error, result->status, false);
        }
      } else {
        last_error = "transport error: " + httplib::to_string(result.error());
      }
      if (attempt < config.retry.max_attempts) {
        retries.fetch_add(1, std::memory_order_relaxed);
        std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(delay.count()) * config.retry.multiplier));
      }
    }
    throw BackendError("backend unreachable after " + std::to_string(config.retry.max_attempts) +
                           " attempts; last error: " + last_error,
                       0, true);
  }
};

RemoteBackend::RemoteBackend(RemoteConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))), id_(impl_->config.id) {}

RemoteBackend::~RemoteBackend() = default;

CompletionResponse RemoteBackend::complete(const CompletionRequest& request) {
  require_user_message(request);
  const json reply = impl_->post_json("/chat/completions", request_to_json(request));
  CompletionResponse response;
  response.backend_id = id_;
  try {
    response.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected chat-completions response shape: ") + e.what());
  }
  return response;
}

std::uint64_t RemoteBackend::retries() const { return impl_->retries.load(); }

std::vector<float> RemoteBackend::embed(const std::string& model, const std::string& text) {
  const json reply = impl_->post_json("/embeddings", json{{"model", model}, {"input", text}});
  try {
    return reply.at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected embeddings response shape: ") + e.what());
  }
}

BackendChoice make_backend(const std::string& spec, const RemoteConfig& remote) {
  if (spec.rfind("mock:", 0) == 0) {
    const std::string rest = spec.substr(5);
    MockSpec mock;
    if (rest == "echo") {
      mock = MockSpec::echo_last_user();
    } else if (rest.rfind("fixed:", 0) == 0) {
      mock = MockSpec::fixed(rest.substr(6));
    } else if (rest.rfind("fixture:", 0) == 0) {
      mock = MockSpec::fixture_from_file(rest.substr(8));
    } else if (rest.rfind("regex:", 0) == 0) {
      mock = MockSpec::regex_table_from_file(rest.substr(6));
    } else if (rest.size() > 5 && rest.substr(rest.size() - 5) == ".json") {
      mock = MockSpec::fixture_from_file(rest);  // mock:<file>.json shorthand
    } else {
      throw std::invalid_argument("unknown mock backend spec: " + spec);
    }
    return {std::make_shared<MockBackend>(std::move(mock)), "mock"};
  }
  if (spec.rfind("remote:", 0) == 0) {
    const std::string model = spec.substr(7);
    if (model.empty()) throw std::invalid_argument("remote backend spec needs a model name");
    if (remote.base_url.empty()) {
      throw std::invalid_argument("remote backend requires an API base url (GEE_API_BASE)");
    }
    return {std::make_shared<RemoteBackend>(remote), model};
  }
  throw std::invalid_argument("unknown backend spec: " + spec);
}

}  // namespace gee
