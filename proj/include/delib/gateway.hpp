#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "delib/prompting.hpp"

namespace delib {

struct DecodingParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  bool json_response_format = false;

  nlohmann::json to_json() const;
  static DecodingParams from_json(const nlohmann::json& j);
};

struct BackendLimits {
  int max_in_flight = 4;
  int retry_budget = 3;
  int requests_per_minute = 0;  // 0 = uncapped
  int backoff_base_ms = 500;
  int backoff_max_ms = 30'000;
  int timeout_s = 120;

  nlohmann::json to_json() const;
  static BackendLimits from_json(const nlohmann::json& j);
};

enum class BackendKind { kOpenAiCompatible, kMock };

struct BackendConfig {
  std::string name;
  BackendKind kind = BackendKind::kOpenAiCompatible;
  std::string endpoint;  // base URL, e.g. http://localhost:8000/v1
  std::string model;
  std::string auth_env;  // environment variable holding the bearer token; "" = none
  DecodingParams decoding;
  BackendLimits limits;
  std::filesystem::path mock_script;  // kMock only; empty = label everything 1

  // Throws ConfigError on invalid limits or missing fields.
  void validate() const;
  nlohmann::json to_json() const;
  static BackendConfig from_json(const std::string& name, const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
  // Digest of everything that can change model output (limits excluded).
  std::string digest() const;
};

// Out-of-band request metadata. Never sent over the wire and not part of
// the cache key; the mock backend uses it to script responses.
struct RequestContext {
  std::string sentence_id;
  Role role = Role::kPredictor;
  Schema schema = Schema::kSimple;
  std::optional<int> predictor_label;
  std::optional<int> target_label;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  DecodingParams decoding;
  RequestContext context;
};

// Raw HTTP outcome. status 0 means the request never completed (connection
// failure or timeout).
struct TransportResponse {
  int status = 0;
  std::string body;
  std::string error;
  std::optional<std::chrono::milliseconds> retry_after;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResponse send(const ChatRequest& request) = 0;
};

// OpenAI-compatible POST {endpoint}/chat/completions.
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint, std::string bearer_token, std::chrono::seconds timeout);
  TransportResponse send(const ChatRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string bearer_token_;
  std::chrono::seconds timeout_;
};

// Request body sent to chat-completions endpoints.
nlohmann::json chat_request_body(const ChatRequest& request);

struct Usage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long total_tokens = 0;
};

struct CompletionResult {
  std::string text;
  std::optional<Usage> usage;
  double latency_ms = 0.0;
  bool cached = false;
  int attempt = 0;  // 0-based ordinal of the successful attempt
  std::string key;
};

// Extracts choices[0].message.content and usage. Throws TransportError.
CompletionResult parse_chat_response(const std::string& body);

// cache/<backend>/<first 2 hex>/<key>.json
class ResponseCache {
 public:
  ResponseCache(std::filesystem::path root, std::string backend_name);

  std::optional<CompletionResult> get(const std::string& key) const;
  void put(const std::string& key, const CompletionResult& result);
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::string, CompletionResult> index_;
  std::mutex write_mu_;
};

// Digest over backend name, model, decoding parameters and messages.
std::string cache_key(const BackendConfig& backend, std::span<const Message> messages);

struct ClassifyOutcome {
  CompletionResult completion;
  std::optional<ParsedPrediction> prediction;
  std::string failure;  // schema failure reason when !prediction

  bool ok() const { return prediction.has_value(); }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Gateway {
 public:
  // Remote backends must have their credential variable set (ConfigError).
  Gateway(BackendConfig backend, std::shared_ptr<Transport> transport, std::filesystem::path cache_root,
          Sleeper sleeper = {});
  // Builds the HTTP or mock transport matching backend.kind.
  static std::unique_ptr<Gateway> open(const BackendConfig& backend, const std::filesystem::path& cache_root);

  // Cache hit: no transport activity. Miss: dispatch with retries on status
  // 0, 408, 429 and 5xx, exponential backoff, then store. Failures are never cached.
  CompletionResult complete(std::span<const Message> messages, const RequestContext& context = {});
  // complete + parse_prediction; parse failures come back as outcomes.
  ClassifyOutcome classify(const PromptBundle& bundle, RepairPolicy policy, RequestContext context = {});

  const BackendConfig& backend() const { return backend_; }
  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  void admit_rate();

  BackendConfig backend_;
  std::shared_ptr<Transport> transport_;
  ResponseCache cache_;
  Sleeper sleeper_;
  std::counting_semaphore<1 << 16> in_flight_;
  std::mutex rate_mu_;
  std::deque<std::chrono::steady_clock::time_point> recent_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace delib
