#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "delib/corpus.hpp"
#include "delib/gateway.hpp"
#include "delib/prompting.hpp"

namespace delib {

enum class Resolution { kAgreement, kTiebreak, kCriticAccepted, kJudgeDecided };
std::string_view resolution_name(Resolution r);
Resolution parse_resolution(std::string_view name);

struct AgentStep {
  Role role = Role::kPredictor;
  Schema schema = Schema::kSimple;
  std::string prompt_digest;
  std::string raw_digest;
  int label = 0;
  nlohmann::json fields = nlohmann::json::object();  // parsed schema fields
  std::vector<std::string> repairs;

  bool operator==(const AgentStep&) const = default;
};

struct AgentTrace {
  std::string sentence_id;
  std::vector<AgentStep> steps;
  int final_label = 0;
  Resolution resolution = Resolution::kAgreement;

  nlohmann::json to_json() const;
  static AgentTrace from_json(const nlohmann::json& j);
  bool operator==(const AgentTrace&) const = default;
};

struct CriticOutput {
  bool sound = false;
  std::string issues;
  int suggestion = 0;
};

struct JudgeOutput {
  std::string rationale;
  int label = 0;
};

// One orchestrated sentence. On a schema failure in any step, trace is empty
// and failure names the step; completions holds every call made either way.
struct AgentOutcome {
  std::optional<AgentTrace> trace;
  std::string failure;
  std::vector<CompletionResult> completions;

  bool ok() const { return trace.has_value(); }
};

struct AgentContext {
  Gateway& gateway;
  const PromptTemplates& templates;
  RepairPolicy policy = RepairPolicy::kLenient;
};

PromptBundle render_second_opinion(const PromptTemplates& t, const Sentence& sentence, int first_label);
PromptBundle render_tiebreak(const PromptTemplates& t, const Sentence& sentence, int first_label, int second_label);
PromptBundle render_critic(const PromptTemplates& t, const Sentence& sentence, const ParsedPrediction& predictor,
                           VariantId variant);
PromptBundle render_judge(const PromptTemplates& t, const Sentence& sentence, const ParsedPrediction& predictor,
                          const ParsedPrediction& critic, VariantId variant);

// Agent 1 zero-shot, agent 2 sees agent 1's label, agent 3 breaks ties.
AgentOutcome run_majority_vote(AgentContext ctx, const Sentence& sentence);

// Predictor (CoT, optionally with reasoned examples), critic, and a judge
// that is consulted only when the critic's suggestion differs.
AgentOutcome run_predictor_critic_judge(AgentContext ctx, const Sentence& sentence, VariantId variant,
                                        std::span<const Example> examples = {});

// Critic consistency: a "sound" assessment must endorse the predictor's
// label. STRICT rejects the contradiction; LENIENT rewrites it to "flawed"
// and logs the repair. Returns false if the output must be rejected.
bool normalize_critic(ParsedPrediction& critic, int predictor_label, RepairPolicy policy);

struct DisagreementReport {
  std::size_t n_disagreements = 0;
  std::size_t judge_followed_critic = 0;
  std::size_t judge_sided_with_predictor = 0;
  // Indexed by [from][to][gold]; from = first agent's label, to = final.
  std::array<std::array<std::array<std::size_t, 2>, 2>, 2> flips{};

  std::size_t corrected_to_nondeliberative = 0;      // 1 -> 0
  std::size_t corrected_to_deliberative = 0;         // 0 -> 1
  std::size_t true_positives_flagged_false = 0;      // 1 -> 0, gold 1
  std::size_t false_positives_caught = 0;            // 1 -> 0, gold 0
  std::size_t correctly_changed_to_deliberative = 0; // 0 -> 1, gold 1
  std::size_t wrongly_changed_to_deliberative = 0;   // 0 -> 1, gold 0

  // Count of disagreements by (from, to, correct_before, correct_after).
  std::size_t cell(int from, int to, bool correct_before, bool correct_after) const;
  nlohmann::json to_json() const;
};

// Over traces where the first two agents disagreed. Throws DataError for a
// trace whose sentence is not in the corpus.
DisagreementReport analyze_disagreements(std::span<const AgentTrace> traces, const Corpus& corpus);
std::string format_disagreement_report(const DisagreementReport& r);
std::string disagreement_report_csv(const DisagreementReport& r);

}  // namespace delib
