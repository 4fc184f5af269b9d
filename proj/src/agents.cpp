#include "delib/agents.hpp"

#include <sstream>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

json fields_of(const ParsedPrediction& p, Schema schema) { return json::parse(serialize_prediction(p, schema)); }

std::string prompt_digest(const PromptBundle& b) { return sha256_hex(b.system + '\0' + b.user); }

// One step: call, parse, append to the trace under construction.
struct StepResult {
  std::optional<ParsedPrediction> prediction;
  std::string failure;
};

StepResult run_step(AgentContext& ctx, const PromptBundle& bundle, RequestContext rc, AgentOutcome& out,
                    std::vector<AgentStep>& steps) {
  ClassifyOutcome res = ctx.gateway.classify(bundle, ctx.policy, rc);
  out.completions.push_back(res.completion);
  if (!res.ok()) return {std::nullopt, std::string(role_name(bundle.role)) + ": " + res.failure};
  AgentStep step;
  step.role = bundle.role;
  step.schema = bundle.expected_schema;
  step.prompt_digest = prompt_digest(bundle);
  step.raw_digest = sha256_hex(res.completion.text);
  step.label = res.prediction->label;
  step.fields = fields_of(*res.prediction, bundle.expected_schema);
  step.repairs = res.prediction->repairs;
  steps.push_back(std::move(step));
  return {std::move(res.prediction), {}};
}

Schema parse_schema(std::string_view s) {
  for (Schema v : {Schema::kSimple, Schema::kCot, Schema::kCritic, Schema::kJudge}) {
    if (schema_name(v) == s) return v;
  }
  throw DataError("unknown schema '" + std::string(s) + "'");
}

}  // namespace

std::string_view resolution_name(Resolution r) {
  switch (r) {
    case Resolution::kAgreement: return "AGREEMENT";
    case Resolution::kTiebreak: return "TIEBREAK";
    case Resolution::kCriticAccepted: return "CRITIC_ACCEPTED";
    case Resolution::kJudgeDecided: return "JUDGE_DECIDED";
  }
  return "UNKNOWN";
}

Resolution parse_resolution(std::string_view name) {
  for (Resolution r : {Resolution::kAgreement, Resolution::kTiebreak, Resolution::kCriticAccepted,
                       Resolution::kJudgeDecided}) {
    if (resolution_name(r) == name) return r;
  }
  throw DataError("unknown resolution '" + std::string(name) + "'");
}

json AgentTrace::to_json() const {
  json s = json::array();
  for (const auto& st : steps) {
    s.push_back(json{{"role", role_name(st.role)},
                     {"schema", schema_name(st.schema)},
                     {"prompt_digest", st.prompt_digest},
                     {"raw_digest", st.raw_digest},
                     {"label", st.label},
                     {"fields", st.fields},
                     {"repairs", st.repairs}});
  }
  return json{{"sentence_id", sentence_id},
              {"steps", std::move(s)},
              {"final_label", final_label},
              {"resolution", resolution_name(resolution)}};
}

AgentTrace AgentTrace::from_json(const json& j) {
  AgentTrace t;
  t.sentence_id = j.at("sentence_id").get<std::string>();
  t.final_label = j.at("final_label").get<int>();
  t.resolution = parse_resolution(j.at("resolution").get<std::string>());
  for (const auto& s : j.at("steps")) {
    AgentStep st;
    st.role = parse_role(s.at("role").get<std::string>());
    st.schema = parse_schema(s.at("schema").get<std::string>());
    st.prompt_digest = s.at("prompt_digest").get<std::string>();
    st.raw_digest = s.at("raw_digest").get<std::string>();
    st.label = s.at("label").get<int>();
    st.fields = s.at("fields");
    st.repairs = s.at("repairs").get<std::vector<std::string>>();
    t.steps.push_back(std::move(st));
  }
  return t;
}

PromptBundle render_second_opinion(const PromptTemplates& t, const Sentence& sentence, int first_label) {
  PromptBundle b = render_zero_shot(t, sentence);
  b.variant = VariantId::kMultiAgent;
  b.role = Role::kSecond;
  b.user = render_template(t.get("majority_second_user"),
                           {{"sentence", sentence.text}, {"first_label", std::to_string(first_label)}});
  return b;
}

PromptBundle render_tiebreak(const PromptTemplates& t, const Sentence& sentence, int first_label,
                             int second_label) {
  PromptBundle b = render_zero_shot(t, sentence);
  b.variant = VariantId::kMultiAgent;
  b.role = Role::kJudge;
  b.user = render_template(t.get("majority_tiebreak_user"), {{"sentence", sentence.text},
                                                             {"first_label", std::to_string(first_label)},
                                                             {"second_label", std::to_string(second_label)}});
  return b;
}

PromptBundle render_critic(const PromptTemplates& t, const Sentence& sentence, const ParsedPrediction& predictor,
                           VariantId variant) {
  PromptBundle b;
  b.variant = variant;
  b.role = Role::kCritic;
  b.system = render_template(t.get("critic_system"), {{"definitions", t.get("definitions")}});
  b.user = render_template(t.get("critic_user"), {{"sentence", sentence.text},
                                                  {"predictor_output", serialize_prediction(predictor, Schema::kCot)}});
  b.expected_schema = Schema::kCritic;
  b.sentence_id = sentence.id;
  return b;
}

PromptBundle render_judge(const PromptTemplates& t, const Sentence& sentence, const ParsedPrediction& predictor,
                          const ParsedPrediction& critic, VariantId variant) {
  PromptBundle b;
  b.variant = variant;
  b.role = Role::kJudge;
  b.system = render_template(t.get("judge_system"), {{"definitions", t.get("definitions")}});
  b.user = render_template(t.get("judge_user"),
                           {{"sentence", sentence.text},
                            {"predictor_output", serialize_prediction(predictor, Schema::kCot)},
                            {"critic_output", serialize_prediction(critic, Schema::kCritic)}});
  b.expected_schema = Schema::kJudge;
  b.sentence_id = sentence.id;
  return b;
}

AgentOutcome run_majority_vote(AgentContext ctx, const Sentence& sentence) {
  AgentOutcome out;
  std::vector<AgentStep> steps;
  PromptBundle first = render_zero_shot(ctx.templates, sentence);
  first.variant = VariantId::kMultiAgent;
  auto a = run_step(ctx, first, {}, out, steps);
  if (!a.prediction) {
    out.failure = a.failure;
    return out;
  }
  const int l1 = a.prediction->label;
  RequestContext rc2;
  rc2.predictor_label = l1;
  auto b = run_step(ctx, render_second_opinion(ctx.templates, sentence, l1), rc2, out, steps);
  if (!b.prediction) {
    out.failure = b.failure;
    return out;
  }
  const int l2 = b.prediction->label;
  AgentTrace trace;
  trace.sentence_id = sentence.id;
  if (l1 == l2) {
    trace.final_label = l1;
    trace.resolution = Resolution::kAgreement;
  } else {
    auto c = run_step(ctx, render_tiebreak(ctx.templates, sentence, l1, l2), rc2, out, steps);
    if (!c.prediction) {
      out.failure = c.failure;
      return out;
    }
    trace.final_label = c.prediction->label;
    trace.resolution = Resolution::kTiebreak;
  }
  trace.steps = std::move(steps);
  out.trace = std::move(trace);
  return out;
}

bool normalize_critic(ParsedPrediction& critic, int predictor_label, RepairPolicy policy) {
  if (critic.assessment == "sound" && critic.label != predictor_label) {
    if (policy == RepairPolicy::kStrict) return false;
    critic.assessment = "flawed";
    critic.repairs.push_back("critic-sound-contradiction");
  }
  return true;
}

AgentOutcome run_predictor_critic_judge(AgentContext ctx, const Sentence& sentence, VariantId variant,
                                        std::span<const Example> examples) {
  AgentOutcome out;
  std::vector<AgentStep> steps;
  const bool with_examples = variant == VariantId::kCotFewShotErrorMultiAgent || variant == VariantId::kCotFewShotError;
  if (with_examples && examples.empty()) throw DataError("predictor with error-based examples needs examples");
  const VariantId trace_variant = with_examples ? VariantId::kCotFewShotErrorMultiAgent : VariantId::kCotMultiAgent;
  PromptBundle pb = with_examples ? render_cot_few_shot(ctx.templates, sentence, examples, trace_variant)
                                  : render_cot(ctx.templates, sentence, trace_variant);
  auto pred = run_step(ctx, pb, {}, out, steps);
  if (!pred.prediction) {
    out.failure = pred.failure;
    return out;
  }
  const int l1 = pred.prediction->label;

  const PromptBundle cb = render_critic(ctx.templates, sentence, *pred.prediction, trace_variant);
  RequestContext rc;
  rc.predictor_label = l1;
  ClassifyOutcome cres = ctx.gateway.classify(cb, ctx.policy, rc);
  out.completions.push_back(cres.completion);
  if (!cres.ok()) {
    out.failure = "CRITIC: " + cres.failure;
    return out;
  }
  ParsedPrediction critic = std::move(*cres.prediction);
  if (!normalize_critic(critic, l1, ctx.policy)) {
    out.failure = "CRITIC: sound assessment contradicts its suggestion";
    return out;
  }
  AgentStep cstep;
  cstep.role = Role::kCritic;
  cstep.schema = Schema::kCritic;
  cstep.prompt_digest = prompt_digest(cb);
  cstep.raw_digest = sha256_hex(cres.completion.text);
  cstep.label = critic.label;
  cstep.fields = fields_of(critic, Schema::kCritic);
  cstep.repairs = critic.repairs;
  steps.push_back(std::move(cstep));

  AgentTrace trace;
  trace.sentence_id = sentence.id;
  if (critic.label == l1) {
    trace.final_label = l1;
    trace.resolution = Resolution::kCriticAccepted;
  } else {
    auto judge = run_step(ctx, render_judge(ctx.templates, sentence, *pred.prediction, critic, trace_variant), rc,
                          out, steps);
    if (!judge.prediction) {
      out.failure = judge.failure;
      return out;
    }
    trace.final_label = judge.prediction->label;
    trace.resolution = Resolution::kJudgeDecided;
  }
  trace.steps = std::move(steps);
  out.trace = std::move(trace);
  return out;
}

std::size_t DisagreementReport::cell(int from, int to, bool correct_before, bool correct_after) const {
  // correctness pins the gold label: gold = from if correct_before, else 1 - from
  const int gold = correct_before ? from : 1 - from;
  if ((to == gold) != correct_after) return 0;
  return flips[from][to][gold];
}

json DisagreementReport::to_json() const {
  json cells = json::array();
  for (int from = 0; from < 2; ++from) {
    for (int to = 0; to < 2; ++to) {
      for (int gold = 0; gold < 2; ++gold) {
        cells.push_back(json{{"from", from},
                             {"to", to},
                             {"correct_before", from == gold},
                             {"correct_after", to == gold},
                             {"count", flips[from][to][gold]}});
      }
    }
  }
  return json{{"n_disagreements", n_disagreements},
              {"judge_followed_critic", judge_followed_critic},
              {"judge_sided_with_predictor", judge_sided_with_predictor},
              {"flips", std::move(cells)},
              {"corrected_to_nondeliberative", corrected_to_nondeliberative},
              {"corrected_to_deliberative", corrected_to_deliberative},
              {"true_positives_flagged_false", true_positives_flagged_false},
              {"false_positives_caught", false_positives_caught},
              {"correctly_changed_to_deliberative", correctly_changed_to_deliberative},
              {"wrongly_changed_to_deliberative", wrongly_changed_to_deliberative}};
}

DisagreementReport analyze_disagreements(std::span<const AgentTrace> traces, const Corpus& corpus) {
  DisagreementReport r;
  for (const auto& t : traces) {
    const Sentence* s = corpus.find(t.sentence_id);
    if (!s) throw DataError("trace for sentence " + t.sentence_id + " has no gold label in the corpus");
    if (t.resolution != Resolution::kTiebreak && t.resolution != Resolution::kJudgeDecided) continue;
    if (t.steps.empty()) throw DataError("trace for sentence " + t.sentence_id + " has no steps");
    const int from = t.steps.front().label;
    const int to = t.final_label;
    const int gold = s->gold_label;
    ++r.n_disagreements;
    ++r.flips[from][to][gold];
    if (from == to) {
      ++r.judge_sided_with_predictor;
      continue;
    }
    ++r.judge_followed_critic;
    if (from == 1) {
      ++r.corrected_to_nondeliberative;
      if (gold == 1) ++r.true_positives_flagged_false;
      else ++r.false_positives_caught;
    } else {
      ++r.corrected_to_deliberative;
      if (gold == 1) ++r.correctly_changed_to_deliberative;
      else ++r.wrongly_changed_to_deliberative;
    }
  }
  return r;
}

std::string format_disagreement_report(const DisagreementReport& r) {
  std::ostringstream ss;
  char line[160];
  auto row = [&](const char* name, std::size_t v) {
    std::snprintf(line, sizeof(line), "%-44s %8zu\n", name, v);
    ss << line;
  };
  row("Disagreements (first vs second agent)", r.n_disagreements);
  row("  final followed second agent", r.judge_followed_critic);
  row("  final kept first agent's label", r.judge_sided_with_predictor);
  row("Changed 1 -> 0", r.corrected_to_nondeliberative);
  row("  gold 1 (true positive flagged as false)", r.true_positives_flagged_false);
  row("  gold 0 (false positive caught)", r.false_positives_caught);
  row("Changed 0 -> 1", r.corrected_to_deliberative);
  row("  gold 1 (correctly changed)", r.correctly_changed_to_deliberative);
  row("  gold 0 (wrongly changed)", r.wrongly_changed_to_deliberative);
  return ss.str();
}

std::string disagreement_report_csv(const DisagreementReport& r) {
  std::ostringstream ss;
  ss << "from,to,gold,correct_before,correct_after,count\n";
  for (int from = 0; from < 2; ++from) {
    for (int to = 0; to < 2; ++to) {
      for (int gold = 0; gold < 2; ++gold) {
        ss << from << ',' << to << ',' << gold << ',' << (from == gold) << ',' << (to == gold) << ','
           << r.flips[from][to][gold] << '\n';
      }
    }
  }
  return ss.str();
}

}  // namespace delib
