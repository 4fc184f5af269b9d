#include "delib/prompting.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, 17> kRequiredTemplates{
    "definitions",         "simple_system",        "zero_shot_user",  "few_shot_user",
    "few_shot_example",    "cot_system",           "cot_user",        "cot_few_shot_user",
    "cot_few_shot_example", "reasoning_user",      "reasoning_retry_user",
    "majority_second_user", "majority_tiebreak_user", "critic_system", "critic_user",
    "judge_system",        "judge_user",
};

struct VariantInfo {
  VariantId id;
  std::string_view name;
  std::string_view label;
};

constexpr std::array<VariantInfo, 8> kVariantInfo{{
    {VariantId::kZeroShot, "ZERO_SHOT", "Zero-Shot (baseline)"},
    {VariantId::kFewShot, "FEW_SHOT", "Few-Shot"},
    {VariantId::kFewShotError, "FEW_SHOT_ERROR", "Few-Shot (Error-based)"},
    {VariantId::kCot, "COT", "CoT"},
    {VariantId::kCotFewShotError, "COT_FEW_SHOT_ERROR", "CoT + Few-Shot (Error-based)"},
    {VariantId::kMultiAgent, "MULTI_AGENT", "Multi-agent"},
    {VariantId::kCotMultiAgent, "COT_MULTI_AGENT", "CoT + Multi-agent"},
    {VariantId::kCotFewShotErrorMultiAgent, "COT_FEW_SHOT_ERROR_MULTI_AGENT",
     "CoT + Few-Shot (Error-based) + Multi-agent"},
}};

std::string strip_one_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() / n) * n;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % n;
}

// --- response parsing -----------------------------------------------------

std::optional<json> try_object(std::string_view s) {
  try {
    json j = json::parse(s);
    if (j.is_object()) return j;
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

std::optional<std::string> fenced_body(std::string_view s) {
  const size_t open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  size_t body = s.find('\n', open + 3);
  if (body == std::string_view::npos) return std::nullopt;
  ++body;
  const size_t close = s.find("```", body);
  if (close == std::string_view::npos) return std::string(s.substr(body));
  return std::string(s.substr(body, close - body));
}

// First '{'-to-matching-'}' span that parses as an object.
std::optional<json> first_balanced_object(std::string_view s) {
  for (size_t start = s.find('{'); start != std::string_view::npos; start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < s.size(); ++i) {
      const char c = s[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        if (auto j = try_object(s.substr(start, i - start + 1))) return j;
        break;
      }
    }
  }
  return std::nullopt;
}

int coerce_label(const json& v, std::string_view field, RepairPolicy policy,
                 std::vector<std::string>& repairs) {
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto n = v.get<long long>();
    if (n == 0 || n == 1) return static_cast<int>(n);
  } else if (policy == RepairPolicy::kLenient) {
    if (v.is_boolean()) {
      repairs.push_back("label-coerce");
      return v.get<bool>() ? 1 : 0;
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == 0.0 || d == 1.0) {
        repairs.push_back("label-coerce");
        return d == 1.0 ? 1 : 0;
      }
    }
    if (v.is_string()) {
      const std::string s = trim(v.get<std::string>());
      if (s == "0" || s == "1") {
        repairs.push_back("label-coerce");
        return s == "1" ? 1 : 0;
      }
      const std::string l = to_lower(s);
      if (l == "true" || l == "false") {
        repairs.push_back("label-coerce");
        return l == "true" ? 1 : 0;
      }
    }
  }
  throw SchemaError("uncoercible label in field '" + std::string(field) + "': " + v.dump());
}

std::string required_text(const json& obj, std::string_view field) {
  auto it = obj.find(std::string(field));
  if (it == obj.end()) throw SchemaError("missing field '" + std::string(field) + "'");
  if (!it->is_string()) throw SchemaError("field '" + std::string(field) + "' is not a string");
  std::string s = it->get<std::string>();
  if (trim(s).empty()) throw SchemaError("field '" + std::string(field) + "' is empty");
  return s;
}

std::vector<std::string_view> schema_fields(Schema schema) {
  switch (schema) {
    case Schema::kSimple: return {"deliberative"};
    case Schema::kCot: return {"step1", "step2", "deliberative"};
    case Schema::kCritic: return {"assessment", "issues", "suggestion"};
    case Schema::kJudge: return {"rationale", "deliberative"};
  }
  return {};
}

}  // namespace

std::string_view variant_name(VariantId v) {
  for (const auto& info : kVariantInfo) {
    if (info.id == v) return info.name;
  }
  return "UNKNOWN";
}

std::string_view variant_label(VariantId v) {
  for (const auto& info : kVariantInfo) {
    if (info.id == v) return info.label;
  }
  return "unknown";
}

VariantId parse_variant(std::string_view name) {
  std::string norm;
  for (char c : name) norm.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (const auto& info : kVariantInfo) {
    if (info.name == norm) return info.id;
  }
  throw UsageError("unknown variant '" + std::string(name) + "'");
}

bool uses_error_pool(VariantId v) {
  return v == VariantId::kFewShotError || v == VariantId::kCotFewShotError ||
         v == VariantId::kCotFewShotErrorMultiAgent;
}
bool uses_random_examples(VariantId v) { return v == VariantId::kFewShot; }
bool uses_cot(VariantId v) {
  return v == VariantId::kCot || v == VariantId::kCotFewShotError || v == VariantId::kCotMultiAgent ||
         v == VariantId::kCotFewShotErrorMultiAgent;
}
bool is_multi_agent(VariantId v) {
  return v == VariantId::kMultiAgent || v == VariantId::kCotMultiAgent ||
         v == VariantId::kCotFewShotErrorMultiAgent;
}

std::string_view schema_name(Schema s) {
  switch (s) {
    case Schema::kSimple: return "SIMPLE";
    case Schema::kCot: return "COT";
    case Schema::kCritic: return "CRITIC";
    case Schema::kJudge: return "JUDGE";
  }
  return "UNKNOWN";
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::kPredictor: return "PREDICTOR";
    case Role::kSecond: return "SECOND";
    case Role::kCritic: return "CRITIC";
    case Role::kJudge: return "JUDGE";
    case Role::kReasoning: return "REASONING";
  }
  return "UNKNOWN";
}

Role parse_role(std::string_view name) {
  for (Role r : {Role::kPredictor, Role::kSecond, Role::kCritic, Role::kJudge, Role::kReasoning}) {
    if (to_lower(role_name(r)) == to_lower(name)) return r;
  }
  throw DataError("unknown agent role '" + std::string(name) + "'");
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
  PromptTemplates t;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string material;
  for (const auto& f : files) {
    std::string body = strip_one_newline(read_file(f));
    material += f.filename().string() + '\0' + body + '\0';
    t.files_.emplace(f.stem().string(), std::move(body));
  }
  for (auto name : kRequiredTemplates) {
    if (!t.files_.count(name)) throw ConfigError("template missing: " + (dir / (std::string(name) + ".txt")).string());
  }
  std::string declared = "unversioned";
  if (fs::exists(dir / "VERSION")) declared = trim(read_file(dir / "VERSION"));
  t.version_ = declared + "+" + sha256_hex(material).substr(0, 12);
  return t;
}

PromptTemplates PromptTemplates::shipped() {
  return load(std::filesystem::path(DELIB_DATA_DIR) / "templates");
}

const std::string& PromptTemplates::get(std::string_view name) const {
  auto it = files_.find(name);
  if (it == files_.end()) throw ConfigError("unknown template '" + std::string(name) + "'");
  return it->second;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size() + 256);
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("template placeholder {{" + key + "}} has no value");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::string_view label_text(int label) {
  return label == 1 ? "ALWAYS DELIBERATIVE" : "NOT ALWAYS DELIBERATIVE";
}

PromptBundle render_zero_shot(const PromptTemplates& t, const Sentence& sentence) {
  PromptBundle b;
  b.variant = VariantId::kZeroShot;
  b.system = t.get("simple_system");
  b.user = render_template(t.get("zero_shot_user"), {{"sentence", sentence.text}});
  b.expected_schema = Schema::kSimple;
  b.sentence_id = sentence.id;
  return b;
}

PromptBundle render_few_shot(const PromptTemplates& t, const Sentence& sentence,
                             std::span<const Example> examples, VariantId variant) {
  if (examples.empty()) throw DataError("few-shot prompt needs at least one example");
  std::vector<std::string> lines;
  for (const auto& ex : examples) {
    if (ex.sentence.batch == sentence.batch) {
      throw DataError("example " + ex.sentence.id + " comes from target batch " + sentence.batch);
    }
    lines.push_back(render_template(t.get("few_shot_example"),
                                    {{"example_sentence", ex.sentence.text},
                                     {"label_text", std::string(label_text(ex.gold_label))},
                                     {"label", std::to_string(ex.gold_label)}}));
  }
  PromptBundle b;
  b.variant = variant;
  b.system = t.get("simple_system");
  b.user = render_template(t.get("few_shot_user"), {{"examples", join(lines, "\n")}, {"sentence", sentence.text}});
  b.expected_schema = Schema::kSimple;
  b.sentence_id = sentence.id;
  return b;
}

PromptBundle render_cot(const PromptTemplates& t, const Sentence& sentence, VariantId variant) {
  PromptBundle b;
  b.variant = variant;
  b.system = render_template(t.get("cot_system"), {{"definitions", t.get("definitions")}});
  b.user = render_template(t.get("cot_user"), {{"sentence", sentence.text}});
  b.expected_schema = Schema::kCot;
  b.sentence_id = sentence.id;
  return b;
}

PromptBundle render_cot_few_shot(const PromptTemplates& t, const Sentence& sentence,
                                 std::span<const Example> examples, VariantId variant) {
  if (examples.empty()) throw DataError("few-shot prompt needs at least one example");
  std::vector<std::string> blocks;
  for (const auto& ex : examples) {
    if (!ex.reasoning) throw DataError("example " + ex.sentence.id + " has no reasoning");
    if (ex.sentence.batch == sentence.batch) {
      throw DataError("example " + ex.sentence.id + " comes from target batch " + sentence.batch);
    }
    blocks.push_back(render_template(t.get("cot_few_shot_example"),
                                     {{"example_sentence", ex.sentence.text},
                                      {"step1", ex.reasoning->step1},
                                      {"step2", ex.reasoning->step2},
                                      {"label_text", std::string(label_text(ex.gold_label))},
                                      {"label", std::to_string(ex.gold_label)}}));
  }
  PromptBundle b = render_cot(t, sentence, variant);
  b.user = render_template(t.get("cot_few_shot_user"), {{"examples", join(blocks, "\n\n")}, {"sentence", sentence.text}});
  return b;
}

PromptBundle render_reasoning_request(const PromptTemplates& t, const Example& example, bool retry) {
  PromptBundle b = render_cot(t, example.sentence, VariantId::kCotFewShotError);
  b.role = Role::kReasoning;
  b.user = render_template(t.get(retry ? "reasoning_retry_user" : "reasoning_user"),
                           {{"sentence", example.sentence.text},
                            {"label_text", std::string(label_text(example.gold_label))},
                            {"label", std::to_string(example.gold_label)}});
  return b;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 gen(seed);
  for (size_t i = 0; i + 1 < n; ++i) {
    const size_t j = i + static_cast<size_t>(bounded(gen, n - i));
    std::swap(p[i], p[j]);
  }
  return p;
}

std::vector<Example> select_from_pool(std::span<const Example> pool, std::string_view target_batch,
                                      std::size_t k, std::uint64_t seed, bool stratified) {
  std::vector<const Example*> eligible;
  for (const auto& ex : pool) {
    if (ex.sentence.batch != target_batch) eligible.push_back(&ex);
  }
  if (eligible.size() < k) {
    throw DataError("insufficient example pool for target batch " + std::string(target_batch) + ": need " +
                    std::to_string(k) + ", have " + std::to_string(eligible.size()));
  }
  const auto order = seeded_permutation(eligible.size(), seed);
  std::vector<Example> out;
  if (!stratified) {
    for (size_t i = 0; i < k; ++i) out.push_back(*eligible[order[i]]);
    return out;
  }
  const size_t want_pos = (k + 1) / 2;
  const size_t want_neg = k / 2;
  size_t pos = 0;
  size_t neg = 0;
  for (size_t idx : order) {
    const Example& ex = *eligible[idx];
    if (ex.gold_label == 1 && pos < want_pos) {
      ++pos;
      out.push_back(ex);
    } else if (ex.gold_label == 0 && neg < want_neg) {
      ++neg;
      out.push_back(ex);
    }
    if (out.size() == k) break;
  }
  if (out.size() < k) {
    throw DataError("insufficient example pool for stratified selection in batch " + std::string(target_batch));
  }
  return out;
}

std::vector<Example> select_few_shot_examples(const Corpus& corpus, std::string_view target_batch,
                                              std::size_t k, std::uint64_t seed, bool stratified) {
  std::vector<Example> pool;
  for (const auto& s : corpus.sentences()) {
    if (s.batch != target_batch) pool.push_back(Example{s, s.gold_label, std::nullopt});
  }
  return select_from_pool(pool, target_batch, k, seed, stratified);
}

std::vector<Example> build_error_pool(const RunLabels& zero_shot, const Corpus& corpus,
                                      std::string_view target_batch) {
  std::vector<Example> pool;
  std::set<std::string> uncovered;
  for (const auto& s : corpus.sentences()) {
    if (s.batch == target_batch) continue;
    auto it = zero_shot.find(s.id);
    if (it == zero_shot.end()) {
      uncovered.insert(s.batch);
      continue;
    }
    if (it->second && *it->second != s.gold_label) pool.push_back(Example{s, s.gold_label, std::nullopt});
  }
  if (!uncovered.empty()) {
    throw DataError("zero-shot run does not cover batch(es) " +
                    join(std::vector<std::string>(uncovered.begin(), uncovered.end()), ", "));
  }
  return pool;
}

std::string_view repair_policy_name(RepairPolicy p) {
  return p == RepairPolicy::kStrict ? "STRICT" : "LENIENT";
}

ParsedPrediction parse_prediction(std::string_view raw, Schema schema, RepairPolicy policy) {
  ParsedPrediction p;
  p.raw = std::string(raw);
  const std::string text = trim(raw);
  std::optional<json> obj = try_object(text);
  if (!obj && policy == RepairPolicy::kLenient) {
    std::string scope = text;
    if (auto body = fenced_body(text)) {
      scope = *body;
      obj = try_object(trim(scope));
      if (obj) p.repairs.push_back("fence-strip");
    }
    if (!obj) {
      obj = first_balanced_object(scope);
      if (obj) p.repairs.push_back("object-extract");
    }
  }
  if (!obj) throw SchemaError("no parsable object");

  const auto fields = schema_fields(schema);
  for (const auto& [key, value] : obj->items()) {
    if (std::find(fields.begin(), fields.end(), key) != fields.end()) continue;
    if (policy == RepairPolicy::kStrict) throw SchemaError("unexpected field '" + key + "'");
    p.extra[key] = value;
  }
  if (!p.extra.empty()) p.repairs.push_back("extra-fields");

  auto label_field = [&](std::string_view name) {
    auto it = obj->find(std::string(name));
    if (it == obj->end()) throw SchemaError("missing field '" + std::string(name) + "'");
    return coerce_label(*it, name, policy, p.repairs);
  };

  switch (schema) {
    case Schema::kSimple:
      p.label = label_field("deliberative");
      break;
    case Schema::kCot:
      p.step1 = required_text(*obj, "step1");
      p.step2 = required_text(*obj, "step2");
      p.label = label_field("deliberative");
      break;
    case Schema::kCritic: {
      std::string a = required_text(*obj, "assessment");
      if (policy == RepairPolicy::kLenient) {
        std::string norm = to_lower(trim(a));
        if (norm != a) p.repairs.push_back("assessment-normalize");
        a = std::move(norm);
      }
      if (a != "sound" && a != "flawed") throw SchemaError("assessment must be 'sound' or 'flawed', got '" + a + "'");
      p.assessment = a;
      p.issues = required_text(*obj, "issues");
      p.label = label_field("suggestion");
      break;
    }
    case Schema::kJudge:
      p.rationale = required_text(*obj, "rationale");
      p.label = label_field("deliberative");
      break;
  }
  return p;
}

std::string serialize_prediction(const ParsedPrediction& p, Schema schema) {
  json j = p.extra.is_object() ? p.extra : json::object();
  switch (schema) {
    case Schema::kSimple:
      j["deliberative"] = p.label;
      break;
    case Schema::kCot:
      j["step1"] = p.step1.value_or("");
      j["step2"] = p.step2.value_or("");
      j["deliberative"] = p.label;
      break;
    case Schema::kCritic:
      j["assessment"] = p.assessment.value_or("flawed");
      j["issues"] = p.issues.value_or("");
      j["suggestion"] = p.label;
      break;
    case Schema::kJudge:
      j["rationale"] = p.rationale.value_or("");
      j["deliberative"] = p.label;
      break;
  }
  return j.dump();
}

}  // namespace delib
