#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "delib/gateway.hpp"
#include "delib/prompting.hpp"

namespace delib {

// Generated worked-example reasoning keyed by (backend/model, example id).
// Persisted as append-only JSONL; lines for an already-known key are ignored.
class ReasoningCache {
 public:
  struct Entry {
    bool excluded = false;  // reasoning contradicted the gold label twice
    Reasoning reasoning;
  };

  explicit ReasoningCache(std::filesystem::path file);

  std::optional<Entry> get(const std::string& model, const std::string& example_id) const;
  void put(const std::string& model, const std::string& example_id, const Entry& entry);

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
};

// Asks the backend for step1/step2 reasoning ending in the example's gold
// label. A contradicting (or unparseable) answer is retried once with a
// corrective prompt; a second miss caches the example as excluded and
// returns nullopt. Transport errors propagate.
std::optional<Example> generate_example_reasoning(const Example& example, Gateway& gateway,
                                                  const PromptTemplates& templates, ReasoningCache& cache,
                                                  RepairPolicy policy = RepairPolicy::kLenient);

// k reasoned examples outside target_batch: walks the seeded permutation of
// the eligible pool and keeps the first k that survive reasoning generation.
std::vector<Example> select_reasoned_examples(std::span<const Example> pool, std::string_view target_batch,
                                              std::size_t k, std::uint64_t seed, Gateway& gateway,
                                              const PromptTemplates& templates, ReasoningCache& cache,
                                              RepairPolicy policy = RepairPolicy::kLenient);

}  // namespace delib
