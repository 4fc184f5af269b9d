#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "delib/corpus.hpp"
#include "delib/labels.hpp"

namespace delib {

enum class VariantId {
  kZeroShot,
  kFewShot,
  kFewShotError,
  kCot,
  kCotFewShotError,
  kMultiAgent,
  kCotMultiAgent,
  kCotFewShotErrorMultiAgent,
};

inline constexpr std::array<VariantId, 8> kAllVariants{
    VariantId::kZeroShot,        VariantId::kFewShot,    VariantId::kFewShotError,
    VariantId::kCot,             VariantId::kCotFewShotError, VariantId::kMultiAgent,
    VariantId::kCotMultiAgent,   VariantId::kCotFewShotErrorMultiAgent,
};

// "ZERO_SHOT", "FEW_SHOT", ... as used on the command line and in manifests.
std::string_view variant_name(VariantId v);
// Human-readable row label for comparison tables.
std::string_view variant_label(VariantId v);
// Accepts the enum names case-insensitively with '-' or '_'. Throws UsageError.
VariantId parse_variant(std::string_view name);

bool uses_error_pool(VariantId v);
bool uses_random_examples(VariantId v);
bool uses_cot(VariantId v);
bool is_multi_agent(VariantId v);

enum class Schema { kSimple, kCot, kCritic, kJudge };
std::string_view schema_name(Schema s);

enum class Role { kPredictor, kSecond, kCritic, kJudge, kReasoning };
std::string_view role_name(Role r);
Role parse_role(std::string_view name);

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct PromptBundle {
  VariantId variant = VariantId::kZeroShot;
  Role role = Role::kPredictor;
  std::string system;
  std::string user;
  Schema expected_schema = Schema::kSimple;
  std::string sentence_id;

  std::vector<Message> messages() const { return {{"system", system}, {"user", user}}; }
};

struct Reasoning {
  std::string step1;
  std::string step2;
};

struct Example {
  Sentence sentence;
  int gold_label = 0;
  std::optional<Reasoning> reasoning;
};

// Versioned template directory; see data/templates. Placeholders are written
// {{name}} and substituted in a single pass.
class PromptTemplates {
 public:
  static PromptTemplates load(const std::filesystem::path& dir);
  // The directory shipped with the build.
  static PromptTemplates shipped();

  const std::string& get(std::string_view name) const;
  // "<VERSION file>+<first 12 hex of the content digest>".
  const std::string& version() const { return version_; }

 private:
  std::map<std::string, std::string, std::less<>> files_;
  std::string version_;
};

// Substitutes {{key}} occurrences. Unknown placeholders throw ConfigError.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

PromptBundle render_zero_shot(const PromptTemplates& t, const Sentence& sentence);
PromptBundle render_few_shot(const PromptTemplates& t, const Sentence& sentence,
                             std::span<const Example> examples,
                             VariantId variant = VariantId::kFewShot);
PromptBundle render_cot(const PromptTemplates& t, const Sentence& sentence,
                        VariantId variant = VariantId::kCot);
PromptBundle render_cot_few_shot(const PromptTemplates& t, const Sentence& sentence,
                                 std::span<const Example> examples,
                                 VariantId variant = VariantId::kCotFewShotError);
// Label-conditioned reasoning elicitation for a worked example.
PromptBundle render_reasoning_request(const PromptTemplates& t, const Example& example, bool retry);

// "ALWAYS DELIBERATIVE" or "NOT ALWAYS DELIBERATIVE".
std::string_view label_text(int label);

// Uniform sampling of exactly k examples without replacement from corpus
// sentences outside target_batch. With stratified=true the draw is split
// between the two classes (ceil(k/2) AD).
std::vector<Example> select_few_shot_examples(const Corpus& corpus, std::string_view target_batch,
                                              std::size_t k, std::uint64_t seed,
                                              bool stratified = false);
// Same sampling rule over an explicit pool (e.g. the error pool).
std::vector<Example> select_from_pool(std::span<const Example> pool, std::string_view target_batch,
                                      std::size_t k, std::uint64_t seed, bool stratified = false);
// Seeded permutation of [0, n); deterministic across platforms.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Sentences outside target_batch that the zero-shot run got wrong, carrying
// their gold label. Throws DataError if a non-target batch is not covered.
std::vector<Example> build_error_pool(const RunLabels& zero_shot, const Corpus& corpus,
                                      std::string_view target_batch);

enum class RepairPolicy { kStrict, kLenient };
std::string_view repair_policy_name(RepairPolicy p);

struct ParsedPrediction {
  int label = 0;  // "deliberative", or the critic's "suggestion"
  std::optional<std::string> step1;
  std::optional<std::string> step2;
  std::optional<std::string> assessment;  // critic: "sound" | "flawed"
  std::optional<std::string> issues;      // critic
  std::optional<std::string> rationale;   // judge
  nlohmann::json extra = nlohmann::json::object();
  std::string raw;
  std::vector<std::string> repairs;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws SchemaError when no valid object for `schema` can be recovered.
ParsedPrediction parse_prediction(std::string_view raw, Schema schema, RepairPolicy policy);
// Canonical single-object rendering of the schema fields plus extras.
std::string serialize_prediction(const ParsedPrediction& p, Schema schema);

}  // namespace delib
