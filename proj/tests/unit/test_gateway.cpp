#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include "delib/errors.hpp"
#include "delib/gateway.hpp"
#include "delib/mock_backend.hpp"
#include "delib/util.hpp"
#include "helpers.hpp"

using namespace delib;
using json = nlohmann::json;
using testing_support::TempDir;

namespace {

BackendConfig mock_config(const std::string& name = "mock") {
  BackendConfig b;
  b.name = name;
  b.kind = BackendKind::kMock;
  b.model = "mock-model";
  b.limits.backoff_base_ms = 1;
  return b;
}

std::vector<Message> msgs(const std::string& user) { return {{"system", "Answer in JSON."}, {"user", user}}; }

// Records requested sleeps instead of sleeping.
struct SleepLog {
  std::vector<long long> ms;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { ms.push_back(d.count()); };
  }
};

// Fixed sequence of canned responses.
class SequenceTransport : public Transport {
 public:
  explicit SequenceTransport(std::vector<TransportResponse> seq) : seq_(std::move(seq)) {}
  TransportResponse send(const ChatRequest&) override {
    ++calls;
    if (i_ < seq_.size()) return seq_[i_++];
    return seq_.back();
  }
  int calls = 0;

 private:
  std::vector<TransportResponse> seq_;
  std::size_t i_ = 0;
};

TransportResponse ok(const std::string& content) {
  json body{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})},
            {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 2}, {"total_tokens", 5}}}};
  return TransportResponse{200, body.dump(), "", std::nullopt};
}

PromptBundle simple_bundle(const std::string& sentence) {
  PromptBundle b;
  b.system = "Answer in JSON.";
  b.user = sentence;
  b.sentence_id = sentence_id("K1", sentence);
  b.expected_schema = Schema::kSimple;
  return b;
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("config validation and defaults") {
    BackendConfig b = BackendConfig::from_json("qwen", json{{"endpoint", "http://localhost:8000/v1"}, {"model", "q"}});
    CHECK(b.decoding.temperature == 0.0);
    CHECK(b.limits.max_in_flight >= 1);
    CHECK_NOTHROW(b.validate());
    b.limits.max_in_flight = 0;
    CHECK_THROWS_AS(b.validate(), ConfigError);
    b.limits.max_in_flight = 1;
    b.limits.retry_budget = -1;
    CHECK_THROWS_AS(b.validate(), ConfigError);
    CHECK_THROWS_AS(BackendConfig::from_json("x", json{{"kind", "grpc"}}), ConfigError);
    CHECK_THROWS_AS(BackendConfig::from_json("x", json{{"model", "m"}}).validate(), ConfigError);
  }

  TEST_CASE("cache key changes with any message byte and with decoding") {
    BackendConfig b = mock_config();
    auto k1 = cache_key(b, msgs("hello"));
    CHECK(k1 == cache_key(b, msgs("hello")));
    CHECK(k1 != cache_key(b, msgs("hello ")));
    CHECK(k1 != cache_key(b, msgs("Hello")));
    BackendConfig warm = b;
    warm.decoding.temperature = 0.7;
    CHECK(k1 != cache_key(warm, msgs("hello")));
    BackendConfig other = b;
    other.name = "other";
    CHECK(k1 != cache_key(other, msgs("hello")));
    BackendConfig limited = b;
    limited.limits.max_in_flight = 9;
    CHECK(k1 == cache_key(limited, msgs("hello")));
  }

  TEST_CASE("second identical call is served from cache") {
    TempDir dir;
    auto transport = mock_backend(MockScript::label_all(1));
    Gateway g(mock_config(), transport, dir.path());
    auto first = g.complete(msgs("x"));
    CHECK_FALSE(first.cached);
    auto second = g.complete(msgs("x"));
    CHECK(second.cached);
    CHECK(second.attempt == 0);
    CHECK(second.text == first.text);
    CHECK(transport->calls() == 1);
    // A fresh gateway over the same directory still hits.
    auto t2 = mock_backend(MockScript::label_all(0));
    Gateway g2(mock_config(), t2, dir.path());
    CHECK(g2.complete(msgs("x")).text == first.text);
    CHECK(t2->calls() == 0);
    const auto path = dir.path() / "mock" / first.key.substr(0, 2) / (first.key + ".json");
    CHECK(std::filesystem::exists(path));
  }

  TEST_CASE("429 twice then success reports attempt 2") {
    TempDir dir;
    auto t = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{
        {429, "slow down", "", std::nullopt}, {429, "slow down", "", std::chrono::milliseconds(7)},
        ok("{\"deliberative\":1}")});
    SleepLog log;
    BackendConfig b = mock_config();
    b.limits.backoff_base_ms = 100;
    Gateway g(b, t, dir.path(), log.sleeper());
    auto r = g.complete(msgs("x"));
    CHECK(r.attempt == 2);
    CHECK(t->calls == 3);
    REQUIRE(log.ms.size() == 2);
    CHECK(log.ms[0] == 100);
    CHECK(log.ms[1] == 200);
    REQUIRE(r.usage.has_value());
    CHECK(r.usage->total_tokens == 5);
  }

  TEST_CASE("backoff honours Retry-After and the cap") {
    TempDir dir;
    auto t = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{
        {503, "", "", std::chrono::milliseconds(5000)}, {0, "", "timeout", std::nullopt}, ok("{\"deliberative\":0}")});
    SleepLog log;
    BackendConfig b = mock_config();
    b.limits.backoff_base_ms = 10;
    b.limits.backoff_max_ms = 1000;
    Gateway g(b, t, dir.path(), log.sleeper());
    g.complete(msgs("x"));
    REQUIRE(log.ms.size() == 2);
    CHECK(log.ms[0] == 1000);
    CHECK(log.ms[1] == 20);
  }

  TEST_CASE("exhausted retries and non-retryable statuses never poison the cache") {
    TempDir dir;
    auto t = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{{500, "boom", "", std::nullopt}});
    BackendConfig b = mock_config();
    b.limits.retry_budget = 2;
    SleepLog log;
    Gateway g(b, t, dir.path(), log.sleeper());
    CHECK_THROWS_AS(g.complete(msgs("x")), TransportError);
    CHECK(t->calls == 3);
    auto good = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{ok("{\"deliberative\":1}")});
    Gateway g2(b, good, dir.path(), log.sleeper());
    CHECK_FALSE(g2.complete(msgs("x")).cached);

    auto bad = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{{400, "bad", "", std::nullopt}});
    Gateway g3(b, bad, dir.path(), log.sleeper());
    CHECK_THROWS_AS(g3.complete(msgs("y")), TransportError);
    CHECK(bad->calls == 1);
    auto denied = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{{401, "no", "", std::nullopt}});
    Gateway g4(b, denied, dir.path(), log.sleeper());
    CHECK_THROWS_WITH_AS(g4.complete(msgs("z")), doctest::Contains("authentication"), TransportError);
    CHECK(denied->calls == 1);
  }

  TEST_CASE("malformed transport body is a transport error") {
    TempDir dir;
    auto t = std::make_shared<SequenceTransport>(std::vector<TransportResponse>{{200, "not json", "", std::nullopt}});
    Gateway g(mock_config(), t, dir.path());
    CHECK_THROWS_AS(g.complete(msgs("x")), TransportError);
    CHECK_THROWS_AS(parse_chat_response("{\"choices\":[]}"), TransportError);
  }

  TEST_CASE("missing credential fails before any dispatch") {
    TempDir dir;
    BackendConfig b;
    b.name = "remote";
    b.endpoint = "http://127.0.0.1:9/v1";
    b.model = "m";
    b.auth_env = "DELIB_TEST_SURELY_UNSET_TOKEN";
    ::unsetenv(b.auth_env.c_str());
    CHECK_THROWS_AS(Gateway::open(b, dir.path()), ConfigError);
  }

  TEST_CASE("request body shape") {
    ChatRequest r;
    r.model = "qwen";
    r.messages = msgs("hi");
    r.decoding.json_response_format = true;
    json j = chat_request_body(r);
    CHECK(j["model"] == "qwen");
    CHECK(j["temperature"] == 0.0);
    CHECK(j["messages"].size() == 2);
    CHECK(j["messages"][1]["content"] == "hi");
    CHECK(j["response_format"]["type"] == "json_object");
    CHECK(j["stream"] == false);
  }

  TEST_CASE("classify: labels, lenient repair, strict schema failure") {
    TempDir dir;
    MockScript script;
    script.fallback.reset();
    MockRule garbage;
    garbage.pattern = "garbage";
    garbage.action.kind = MockAction::Kind::kRaw;
    garbage.action.raw = "I cannot answer that.";
    MockRule prose;
    prose.pattern = "prose";
    prose.action.kind = MockAction::Kind::kRaw;
    prose.action.raw = "Sure. {\"deliberative\": \"0\"} Done.";
    MockRule one;
    one.pattern = "one";
    one.action.label = 1;
    script.rules = {garbage, prose, one};
    auto t = mock_backend(script);
    Gateway g(mock_config(), t, dir.path());
    auto a = g.classify(simple_bundle("one"), RepairPolicy::kStrict);
    REQUIRE(a.ok());
    CHECK(a.prediction->label == 1);
    auto b = g.classify(simple_bundle("prose"), RepairPolicy::kLenient);
    REQUIRE(b.ok());
    CHECK(b.prediction->label == 0);
    CHECK_FALSE(b.prediction->repairs.empty());
    auto c = g.classify(simple_bundle("garbage"), RepairPolicy::kStrict);
    CHECK_FALSE(c.ok());
    CHECK_FALSE(c.failure.empty());
    // No rule and no default: HTTP 400, which is a transport error.
    CHECK_THROWS_AS(g.classify(simple_bundle("unmatched"), RepairPolicy::kLenient), TransportError);
  }

  TEST_CASE("classify is a pure function for a fixed cache state") {
    TempDir dir;
    Gateway g(mock_config(), mock_backend(MockScript::hashed(0.5, "s")), dir.path());
    auto a = g.classify(simple_bundle("sentence a"), RepairPolicy::kLenient);
    auto b = g.classify(simple_bundle("sentence a"), RepairPolicy::kLenient);
    CHECK(a.completion.text == b.completion.text);
    CHECK(a.prediction->label == b.prediction->label);
  }

  TEST_CASE("mock: per-sentence rule only changes that sentence") {
    TempDir dir;
    MockScript script = MockScript::label_all(1);
    MockRule r;
    r.sentence_id = sentence_id("K1", "special");
    r.action.label = 0;
    script.rules.push_back(r);
    Gateway g(mock_config(), mock_backend(script), dir.path());
    CHECK(g.classify(simple_bundle("special"), RepairPolicy::kStrict).prediction->label == 0);
    CHECK(g.classify(simple_bundle("ordinary"), RepairPolicy::kStrict).prediction->label == 1);
  }

  TEST_CASE("mock: fault injection exercises the retry path") {
    TempDir dir;
    MockScript script = MockScript::label_all(1);
    script.faults = {503};
    auto t = mock_backend(script);
    SleepLog log;
    Gateway g(mock_config(), t, dir.path(), log.sleeper());
    auto r = g.complete(msgs("x"));
    CHECK(r.attempt == 1);
    CHECK(t->calls() == 2);
    CHECK(log.ms.size() == 1);
  }

  TEST_CASE("mock: echo round-trips a sentence with quotes") {
    TempDir dir;
    MockScript script;
    script.fallback = MockAction{};
    script.fallback->kind = MockAction::Kind::kEcho;
    Gateway g(mock_config(), mock_backend(script), dir.path());
    const std::string s = "He said \"we should wait\" and left.";
    auto out = g.classify(simple_bundle(s), RepairPolicy::kLenient);
    REQUIRE(out.ok());
    CHECK(out.prediction->extra["echo"].get<std::string>().find(s) != std::string::npos);
  }

  TEST_CASE("mock script from JSON") {
    json j = json::parse(R"({
      "default": {"label": 0},
      "rules": [{"match": "budget", "label": 1}, {"role": "critic", "label": 1, "assessment": "flawed"}],
      "delay_ms": 0
    })");
    MockScript s = MockScript::from_json(j);
    CHECK(s.rules.size() == 2);
    CHECK(s.fallback->label == 0);
    CHECK(s.rules[1].role == Role::kCritic);
    CHECK_THROWS_AS(MockScript::from_json(json::parse(R"({"default": {"label": 3}})")), ConfigError);
  }

  TEST_CASE("bounded concurrency under parallel callers") {
    TempDir dir;
    MockScript script = MockScript::label_all(1);
    script.delay = std::chrono::microseconds(2000);
    auto t = mock_backend(script);
    BackendConfig b = mock_config();
    b.limits.max_in_flight = 3;
    Gateway g(b, t, dir.path());
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) {
      threads.emplace_back([&, i] {
        for (int j = 0; j < 5; ++j) g.complete(msgs("p" + std::to_string(i) + "-" + std::to_string(j)));
      });
    }
    for (auto& th : threads) th.join();
    CHECK(t->calls() == 60);
    CHECK(t->max_concurrency() <= 3);
    CHECK(t->max_concurrency() >= 1);
  }
}
