#include "delib/reasoning.hpp"

#include <fstream>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {
using json = nlohmann::json;
}

ReasoningCache::ReasoningCache(std::filesystem::path file) : file_(std::move(file)) {
  for (const auto& line : read_jsonl_lines(file_)) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      continue;
    }
    Entry e;
    e.excluded = j.value("excluded", false);
    e.reasoning.step1 = j.value("step1", std::string());
    e.reasoning.step2 = j.value("step2", std::string());
    entries_.emplace(std::make_pair(j.value("model", std::string()), j.value("example_id", std::string())), e);
  }
}

std::optional<ReasoningCache::Entry> ReasoningCache::get(const std::string& model,
                                                         const std::string& example_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({model, example_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReasoningCache::put(const std::string& model, const std::string& example_id, const Entry& entry) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(std::make_pair(model, example_id), entry).second) return;
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to " + file_.string());
  json j{{"model", model},
         {"example_id", example_id},
         {"excluded", entry.excluded},
         {"step1", entry.reasoning.step1},
         {"step2", entry.reasoning.step2}};
  out << j.dump() << '\n';
}

std::optional<Example> generate_example_reasoning(const Example& example, Gateway& gateway,
                                                  const PromptTemplates& templates, ReasoningCache& cache,
                                                  RepairPolicy policy) {
  const std::string model = gateway.backend().name + "/" + gateway.backend().model;
  if (auto hit = cache.get(model, example.sentence.id)) {
    if (hit->excluded) return std::nullopt;
    Example out = example;
    out.reasoning = hit->reasoning;
    return out;
  }
  RequestContext ctx;
  ctx.target_label = example.gold_label;
  for (bool retry : {false, true}) {
    const PromptBundle bundle = render_reasoning_request(templates, example, retry);
    const ClassifyOutcome outcome = gateway.classify(bundle, policy, ctx);
    if (outcome.ok() && outcome.prediction->label == example.gold_label) {
      ReasoningCache::Entry entry{false, Reasoning{*outcome.prediction->step1, *outcome.prediction->step2}};
      cache.put(model, example.sentence.id, entry);
      Example out = example;
      out.reasoning = entry.reasoning;
      return out;
    }
  }
  cache.put(model, example.sentence.id, ReasoningCache::Entry{true, {}});
  return std::nullopt;
}

std::vector<Example> select_reasoned_examples(std::span<const Example> pool, std::string_view target_batch,
                                              std::size_t k, std::uint64_t seed, Gateway& gateway,
                                              const PromptTemplates& templates, ReasoningCache& cache,
                                              RepairPolicy policy) {
  std::vector<const Example*> eligible;
  for (const auto& ex : pool) {
    if (ex.sentence.batch != target_batch) eligible.push_back(&ex);
  }
  std::vector<Example> out;
  for (size_t idx : seeded_permutation(eligible.size(), seed)) {
    if (out.size() == k) break;
    if (auto ex = generate_example_reasoning(*eligible[idx], gateway, templates, cache, policy)) {
      out.push_back(std::move(*ex));
    }
  }
  if (out.size() < k) {
    throw DataError("insufficient example pool for target batch " + std::string(target_batch) + ": need " +
                    std::to_string(k) + " reasoned examples, have " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace delib
