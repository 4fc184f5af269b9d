#include "delib/mock_backend.hpp"

#include <thread>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

MockAction action_from_json(const json& j) {
  MockAction a;
  if (j.contains("raw")) {
    a.kind = MockAction::Kind::kRaw;
    a.raw = j["raw"].get<std::string>();
  } else if (j.value("echo", false)) {
    a.kind = MockAction::Kind::kEcho;
  } else if (j.contains("error")) {
    a.kind = MockAction::Kind::kNoMatch;
  } else if (j.contains("label")) {
    const json& l = j["label"];
    if (l.is_string() && l.get<std::string>() == "hash") {
      a.kind = MockAction::Kind::kHash;
      a.p1 = j.value("p1", 0.5);
      a.salt = j.value("salt", std::string());
    } else if (l.is_number_integer() && (l.get<int>() == 0 || l.get<int>() == 1)) {
      a.label = l.get<int>();
    } else {
      throw ConfigError("mock script: label must be 0, 1 or \"hash\"");
    }
  }
  if (j.contains("assessment")) a.assessment = j["assessment"].get<std::string>();
  a.contradict = j.value("contradict", false);
  return a;
}

std::vector<int> faults_from(const json& j) {
  std::vector<int> out;
  if (j.contains("faults")) {
    for (const auto& f : j["faults"]) out.push_back(f.get<int>());
  }
  return out;
}

TransportResponse ok_response(const std::string& content) {
  json body{{"id", "mock"},
            {"object", "chat.completion"},
            {"choices", json::array({json{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", content}}},
                                          {"finish_reason", "stop"}}})},
            {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}, {"total_tokens", 0}}}};
  return TransportResponse{200, body.dump(), "", std::nullopt};
}

}  // namespace

int hashed_label(const std::string& sentence_id, Role role, double p1, const std::string& salt) {
  const std::string h = sha256_hex(salt + "|" + sentence_id + "|" + std::string(role_name(role)));
  const double u = static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
  return u < p1 ? 1 : 0;
}

MockScript MockScript::from_json(const json& j) {
  MockScript s;
  if (!j.is_object()) throw ConfigError("mock script must be an object");
  if (j.contains("default")) {
    const json& d = j["default"];
    if (d.is_null()) s.fallback.reset();
    else s.fallback = action_from_json(d);
  }
  s.faults = faults_from(j);
  s.delay = std::chrono::microseconds(static_cast<long long>(j.value("delay_ms", 0.0) * 1000));
  if (j.contains("rules")) {
    for (const auto& r : j["rules"]) {
      MockRule rule;
      if (r.contains("sentence_id")) rule.sentence_id = r["sentence_id"].get<std::string>();
      if (r.contains("role")) rule.role = parse_role(r["role"].get<std::string>());
      rule.pattern = r.value("match", std::string());
      rule.action = action_from_json(r);
      rule.faults = faults_from(r);
      s.rules.push_back(std::move(rule));
    }
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("mock script " + path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

MockScript MockScript::label_all(int label) {
  MockScript s;
  s.fallback = MockAction{};
  s.fallback->label = label;
  return s;
}

MockScript MockScript::hashed(double p1, std::string salt) {
  MockScript s;
  MockAction a;
  a.kind = MockAction::Kind::kHash;
  a.p1 = p1;
  a.salt = std::move(salt);
  s.fallback = a;
  return s;
}

MockTransport::MockTransport(MockScript script)
    : fallback_(std::move(script.fallback)), faults_(std::move(script.faults)), delay_(script.delay) {
  for (auto& r : script.rules) {
    CompiledRule c;
    if (!r.pattern.empty()) c.re.emplace(r.pattern, std::regex::ECMAScript);
    c.rule = std::move(r);
    rules_.push_back(std::move(c));
  }
}

std::string MockTransport::render(const MockAction& action, const ChatRequest& request) const {
  const RequestContext& ctx = request.context;
  if (action.kind == MockAction::Kind::kRaw) return action.raw;
  if (action.kind == MockAction::Kind::kEcho) {
    const std::string user = request.messages.empty() ? std::string() : request.messages.back().content;
    return json{{"deliberative", 1}, {"echo", user}}.dump();
  }
  int label = action.kind == MockAction::Kind::kHash ? hashed_label(ctx.sentence_id, ctx.role, action.p1, action.salt)
                                                     : action.label;
  if (ctx.role == Role::kReasoning && ctx.target_label) {
    label = action.contradict ? 1 - *ctx.target_label : *ctx.target_label;
  }
  switch (ctx.schema) {
    case Schema::kSimple:
      return json{{"deliberative", label}}.dump();
    case Schema::kCot:
      return json{{"step1", "The sentence concerns a matter that may still be open."},
                  {"step2", label ? "It expresses a view or recommendation." : "It states a fact or settled policy."},
                  {"deliberative", label}}
          .dump();
    case Schema::kCritic: {
      std::string assessment = action.assessment.value_or(
          ctx.predictor_label && *ctx.predictor_label == label ? "sound" : "flawed");
      return json{{"assessment", assessment},
                  {"issues", assessment == "sound" ? "none" : "The conclusion does not follow from step 2."},
                  {"suggestion", label}}
          .dump();
    }
    case Schema::kJudge:
      return json{{"rationale", "Weighed the prediction against the review."}, {"deliberative", label}}.dump();
  }
  return "{}";
}

TransportResponse MockTransport::send(const ChatRequest& request) {
  ++calls_;
  const size_t now = ++active_;
  size_t seen = max_concurrency_.load();
  while (now > seen && !max_concurrency_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<size_t>& a;
    ~Leave() { --a; }
  } leave{active_};
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

  std::string text;
  for (const auto& m : request.messages) text += m.content + "\n";

  std::lock_guard lock(mu_);
  if (global_faults_used_ < faults_.size()) {
    const int status = faults_[global_faults_used_++];
    return TransportResponse{status, R"({"error":"injected fault"})", "", std::nullopt};
  }
  for (auto& c : rules_) {
    const auto& r = c.rule;
    if (r.sentence_id && *r.sentence_id != request.context.sentence_id) continue;
    if (r.role && *r.role != request.context.role) continue;
    if (c.re && !std::regex_search(text, *c.re)) continue;
    if (c.faults_used < r.faults.size()) {
      const int status = r.faults[c.faults_used++];
      return TransportResponse{status, R"({"error":"injected fault"})", "", std::nullopt};
    }
    if (r.action.kind == MockAction::Kind::kNoMatch) {
      return TransportResponse{400, R"({"error":"mock rule refuses"})", "", std::nullopt};
    }
    return ok_response(render(r.action, request));
  }
  if (!fallback_ || fallback_->kind == MockAction::Kind::kNoMatch) {
    return TransportResponse{400, R"({"error":"no mock rule matched"})", "", std::nullopt};
  }
  return ok_response(render(*fallback_, request));
}

std::shared_ptr<MockTransport> mock_backend(MockScript script) {
  return std::make_shared<MockTransport>(std::move(script));
}

}  // namespace delib
