#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "delib/gateway.hpp"

namespace delib {

// What a matched rule answers with.
struct MockAction {
  enum class Kind { kLabel, kHash, kRaw, kEcho, kNoMatch };
  Kind kind = Kind::kLabel;
  int label = 1;
  double p1 = 0.5;           // kHash: probability of label 1
  std::string salt;          // kHash
  std::string raw;           // kRaw: response text verbatim
  std::optional<std::string> assessment;  // critic override
  bool contradict = false;   // reasoning requests answer against the target label
};

struct MockRule {
  std::optional<std::string> sentence_id;
  std::optional<Role> role;
  std::string pattern;  // regex searched in the concatenated messages; "" = any
  MockAction action;
  std::vector<int> faults;  // HTTP statuses returned by the first matching calls
};

// Rules are tried in order; the first match answers. Without a match the
// fallback answers, or the call fails with HTTP 400 when there is none.
struct MockScript {
  std::vector<MockRule> rules;
  std::optional<MockAction> fallback = MockAction{};
  std::vector<int> faults;  // applied to the first calls regardless of rule
  std::chrono::microseconds delay{0};

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  static MockScript label_all(int label);
  static MockScript hashed(double p1, std::string salt);
};

// Deterministic offline backend speaking the chat-completions wire shape.
class MockTransport : public Transport {
 public:
  explicit MockTransport(MockScript script);
  TransportResponse send(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t max_concurrency() const { return max_concurrency_.load(); }

 private:
  struct CompiledRule {
    MockRule rule;
    std::optional<std::regex> re;
    std::size_t faults_used = 0;
  };

  std::string render(const MockAction& action, const ChatRequest& request) const;

  std::vector<CompiledRule> rules_;
  std::optional<MockAction> fallback_;
  std::vector<int> faults_;
  std::size_t global_faults_used_ = 0;
  std::chrono::microseconds delay_;
  std::mutex mu_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> active_{0};
  std::atomic<std::size_t> max_concurrency_{0};
};

std::shared_ptr<MockTransport> mock_backend(MockScript script);

// Label the kHash action assigns; exposed so tests can predict mock output.
int hashed_label(const std::string& sentence_id, Role role, double p1, const std::string& salt);

}  // namespace delib
