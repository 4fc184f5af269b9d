#include "delib/gateway.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "delib/errors.hpp"
#include "delib/mock_backend.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

json usage_json(const std::optional<Usage>& u) {
  if (!u) return nullptr;
  return json{{"prompt_tokens", u->prompt_tokens},
              {"completion_tokens", u->completion_tokens},
              {"total_tokens", u->total_tokens}};
}

std::optional<Usage> usage_from(const json& j) {
  if (!j.is_object()) return std::nullopt;
  Usage u;
  u.prompt_tokens = j.value("prompt_tokens", 0LL);
  u.completion_tokens = j.value("completion_tokens", 0LL);
  u.total_tokens = j.value("total_tokens", u.prompt_tokens + u.completion_tokens);
  return u;
}

}  // namespace

json DecodingParams::to_json() const {
  return json{{"temperature", temperature},
              {"max_output_tokens", max_output_tokens},
              {"json_response_format", json_response_format}};
}

DecodingParams DecodingParams::from_json(const json& j) {
  DecodingParams d;
  d.temperature = j.value("temperature", d.temperature);
  d.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  d.json_response_format = j.value("json_response_format", d.json_response_format);
  return d;
}

json BackendLimits::to_json() const {
  return json{{"max_in_flight", max_in_flight},      {"retry_budget", retry_budget},
              {"requests_per_minute", requests_per_minute}, {"backoff_base_ms", backoff_base_ms},
              {"backoff_max_ms", backoff_max_ms},    {"timeout_s", timeout_s}};
}

BackendLimits BackendLimits::from_json(const json& j) {
  BackendLimits l;
  l.max_in_flight = j.value("max_in_flight", l.max_in_flight);
  l.retry_budget = j.value("retry_budget", l.retry_budget);
  l.requests_per_minute = j.value("requests_per_minute", l.requests_per_minute);
  l.backoff_base_ms = j.value("backoff_base_ms", l.backoff_base_ms);
  l.backoff_max_ms = j.value("backoff_max_ms", l.backoff_max_ms);
  l.timeout_s = j.value("timeout_s", l.timeout_s);
  return l;
}

void BackendConfig::validate() const {
  if (name.empty()) throw ConfigError("backend without a name");
  if (limits.max_in_flight < 1) throw ConfigError("backend " + name + ": max_in_flight must be >= 1");
  if (limits.retry_budget < 0) throw ConfigError("backend " + name + ": retry_budget must be >= 0");
  if (limits.requests_per_minute < 0) throw ConfigError("backend " + name + ": requests_per_minute must be >= 0");
  if (decoding.temperature < 0) throw ConfigError("backend " + name + ": temperature must be >= 0");
  if (kind == BackendKind::kOpenAiCompatible) {
    if (endpoint.empty()) throw ConfigError("backend " + name + ": endpoint is required");
    if (model.empty()) throw ConfigError("backend " + name + ": model is required");
  }
}

json BackendConfig::to_json() const {
  json j{{"kind", kind == BackendKind::kMock ? "mock" : "openai"},
         {"endpoint", endpoint},
         {"model", model},
         {"auth_env", auth_env},
         {"decoding", decoding.to_json()},
         {"limits", limits.to_json()}};
  if (kind == BackendKind::kMock) j["script"] = mock_script.string();
  return j;
}

BackendConfig BackendConfig::from_json(const std::string& name, const json& j,
                                       const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("backend " + name + ": expected an object");
  BackendConfig b;
  b.name = name;
  const std::string kind = j.value("kind", std::string("openai"));
  if (kind == "mock") b.kind = BackendKind::kMock;
  else if (kind == "openai" || kind == "openai-compatible") b.kind = BackendKind::kOpenAiCompatible;
  else throw ConfigError("backend " + name + ": unknown kind '" + kind + "'");
  b.endpoint = j.value("endpoint", std::string());
  b.model = j.value("model", b.kind == BackendKind::kMock ? name : std::string());
  b.auth_env = j.value("auth_env", std::string());
  if (j.contains("decoding")) b.decoding = DecodingParams::from_json(j["decoding"]);
  if (j.contains("limits")) b.limits = BackendLimits::from_json(j["limits"]);
  if (j.contains("script")) {
    std::filesystem::path p = j["script"].get<std::string>();
    b.mock_script = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  b.validate();
  return b;
}

std::string BackendConfig::digest() const {
  json j = to_json();
  j.erase("limits");
  j["name"] = name;
  if (kind == BackendKind::kMock && !mock_script.empty() && std::filesystem::exists(mock_script)) {
    j["script_digest"] = sha256_hex(read_file(mock_script));
  }
  return sha256_hex(j.dump());
}

json chat_request_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body{{"model", request.model},
            {"messages", std::move(messages)},
            {"temperature", request.decoding.temperature},
            {"max_tokens", request.decoding.max_output_tokens},
            {"stream", false}};
  if (request.decoding.json_response_format) body["response_format"] = {{"type", "json_object"}};
  return body;
}

HttpTransport::HttpTransport(std::string endpoint, std::string bearer_token, std::chrono::seconds timeout)
    : bearer_token_(std::move(bearer_token)), timeout_(timeout) {
  const size_t scheme_end = endpoint.find("://");
  const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const size_t path_start = endpoint.find('/', host_start);
  scheme_host_port_ = endpoint.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

TransportResponse HttpTransport::send(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, chat_request_body(request).dump(),
                         "application/json");
  TransportResponse out;
  if (!res) {
    out.status = 0;
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  if (res->has_header("Retry-After")) {
    char* end = nullptr;
    const std::string v = res->get_header_value("Retry-After");
    const double secs = std::strtod(v.c_str(), &end);
    if (end != v.c_str() && secs >= 0) out.retry_after = std::chrono::milliseconds(static_cast<long long>(secs * 1000));
  }
  return out;
}

CompletionResult parse_chat_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw TransportError("malformed completion response: no choices");
  }
  const json& msg = j["choices"][0].value("message", json::object());
  const json content = msg.value("content", json());
  if (!content.is_string()) throw TransportError("malformed completion response: no message content");
  CompletionResult r;
  r.text = content.get<std::string>();
  if (j.contains("usage")) r.usage = usage_from(j["usage"]);
  return r;
}

ResponseCache::ResponseCache(std::filesystem::path root, std::string backend_name)
    : dir_(std::move(root) / std::move(backend_name)) {}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CompletionResult> ResponseCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mu_);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
  }
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
  CompletionResult r;
  r.text = j.value("response", std::string());
  if (j.contains("usage")) r.usage = usage_from(j["usage"]);
  r.latency_ms = j.value("latency_ms", 0.0);
  r.attempt = j.value("attempt", 0);
  r.key = key;
  std::unique_lock lock(mu_);
  index_.emplace(key, r);
  return r;
}

void ResponseCache::put(const std::string& key, const CompletionResult& result) {
  json j{{"key", key},
         {"response", result.text},
         {"usage", usage_json(result.usage)},
         {"latency_ms", result.latency_ms},
         {"attempt", result.attempt},
         {"stored_at", utc_now_iso8601()}};
  {
    std::lock_guard w(write_mu_);
    write_file_atomic(path_for(key), j.dump(2) + "\n");
  }
  std::unique_lock lock(mu_);
  index_[key] = result;
}

std::string cache_key(const BackendConfig& backend, std::span<const Message> messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json::array({m.role, m.content}));
  const json material{{"backend", backend.name},
                      {"model", backend.model},
                      {"decoding", backend.decoding.to_json()},
                      {"messages", std::move(msgs)}};
  return sha256_hex(material.dump());
}

Gateway::Gateway(BackendConfig backend, std::shared_ptr<Transport> transport, std::filesystem::path cache_root,
                 Sleeper sleeper)
    : backend_(std::move(backend)),
      transport_(std::move(transport)),
      cache_(std::move(cache_root), backend_.name),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      in_flight_(std::max(1, backend_.limits.max_in_flight)) {
  backend_.validate();
  if (!transport_) throw ConfigError("backend " + backend_.name + ": no transport");
}

std::unique_ptr<Gateway> Gateway::open(const BackendConfig& backend, const std::filesystem::path& cache_root) {
  backend.validate();
  std::shared_ptr<Transport> transport;
  if (backend.kind == BackendKind::kMock) {
    transport = mock_backend(backend.mock_script.empty() ? MockScript::label_all(1) : MockScript::load(backend.mock_script));
  } else {
    std::string token;
    if (!backend.auth_env.empty()) {
      const char* v = std::getenv(backend.auth_env.c_str());
      if (!v || !*v) {
        throw ConfigError("backend " + backend.name + ": credential variable " + backend.auth_env + " is not set");
      }
      token = v;
    }
    transport = std::make_shared<HttpTransport>(backend.endpoint, token, std::chrono::seconds(backend.limits.timeout_s));
  }
  return std::make_unique<Gateway>(backend, std::move(transport), cache_root);
}

void Gateway::admit_rate() {
  const int cap = backend_.limits.requests_per_minute;
  if (cap <= 0) return;
  while (true) {
    std::chrono::milliseconds wait{0};
    {
      std::lock_guard lock(rate_mu_);
      const auto now = Clock::now();
      while (!recent_.empty() && now - recent_.front() >= std::chrono::minutes(1)) recent_.pop_front();
      if (static_cast<int>(recent_.size()) < cap) {
        recent_.push_back(now);
        return;
      }
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(recent_.front() + std::chrono::minutes(1) - now) +
             std::chrono::milliseconds(1);
    }
    sleeper_(wait);
  }
}

CompletionResult Gateway::complete(std::span<const Message> messages, const RequestContext& context) {
  const auto started = Clock::now();
  const std::string key = cache_key(backend_, messages);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    hit->cached = true;
    hit->attempt = 0;
    hit->latency_ms = elapsed_ms(started);
    hit->key = key;
    return *hit;
  }

  ChatRequest request{backend_.model, std::vector<Message>(messages.begin(), messages.end()), backend_.decoding, context};
  const int budget = backend_.limits.retry_budget;
  std::string last_error;
  for (int attempt = 0; attempt <= budget; ++attempt) {
    admit_rate();
    TransportResponse resp;
    in_flight_.acquire();
    try {
      ++network_calls_;
      resp = transport_->send(request);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();

    if (resp.status >= 200 && resp.status < 300) {
      CompletionResult r = parse_chat_response(resp.body);
      r.attempt = attempt;
      r.latency_ms = elapsed_ms(started);
      r.key = key;
      cache_.put(key, r);
      return r;
    }
    last_error = resp.status == 0 ? ("transport error: " + resp.error)
                                  : ("HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200));
    if (resp.status == 401 || resp.status == 403) {
      throw TransportError("backend " + backend_.name + ": authentication failed (" + last_error + ")");
    }
    if (!retryable(resp.status)) throw TransportError("backend " + backend_.name + ": " + last_error);
    if (attempt == budget) break;
    long long delay = static_cast<long long>(backend_.limits.backoff_base_ms) << std::min(attempt, 20);
    delay = std::min<long long>(delay, backend_.limits.backoff_max_ms);
    if (resp.retry_after) delay = std::min<long long>(std::max<long long>(delay, resp.retry_after->count()),
                                                      backend_.limits.backoff_max_ms);
    sleeper_(std::chrono::milliseconds(delay));
  }
  throw TransportError("backend " + backend_.name + ": retries exhausted after " + std::to_string(budget + 1) +
                       " attempt(s); last error " + last_error);
}

ClassifyOutcome Gateway::classify(const PromptBundle& bundle, RepairPolicy policy, RequestContext context) {
  if (context.sentence_id.empty()) context.sentence_id = bundle.sentence_id;
  context.role = bundle.role;
  context.schema = bundle.expected_schema;
  const auto messages = bundle.messages();
  ClassifyOutcome out;
  out.completion = complete(messages, context);
  try {
    out.prediction = parse_prediction(out.completion.text, bundle.expected_schema, policy);
  } catch (const SchemaError& e) {
    out.failure = e.what();
  }
  return out;
}

}  // namespace delib
