#include "delib/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "delib/errors.hpp"
#include "delib/reasoning.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

std::string lower_variant(VariantId v) { return to_lower(variant_name(v)); }

void rewrite_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string body;
  for (const auto& l : lines) body += l + '\n';
  write_file_atomic(path, body);
}

class RunWriter {
 public:
  explicit RunWriter(const fs::path& dir)
      : records_(dir / "records.jsonl", std::ios::app),
        traces_(dir / "traces.jsonl", std::ios::app),
        timings_(dir / "timings.jsonl", std::ios::app) {
    if (!records_ || !traces_ || !timings_) throw DataError("cannot open run files in " + dir.string());
  }

  void write(const PredictionRecord& rec, const std::optional<AgentTrace>& trace, const json& timing) {
    std::lock_guard lock(mu_);
    if (trace) traces_ << trace->to_json().dump() << '\n' << std::flush;
    timings_ << timing.dump() << '\n' << std::flush;
    records_ << rec.to_json().dump() << '\n' << std::flush;
  }

 private:
  std::mutex mu_;
  std::ofstream records_;
  std::ofstream traces_;
  std::ofstream timings_;
};

struct SentenceResult {
  PredictionRecord record;
  std::optional<AgentTrace> trace;
  double latency_ms = 0.0;
  std::size_t calls = 0;
  std::size_t cached = 0;
};

SentenceResult process_sentence(const RunOptions& options, const std::string& run_id, const Sentence& s,
                                const std::vector<Example>& examples, Gateway& gw, const PromptTemplates& templates) {
  SentenceResult out;
  out.record.run_id = run_id;
  out.record.sentence_id = s.id;
  const VariantId v = options.variant;

  auto tally = [&](const CompletionResult& c) {
    ++out.calls;
    if (c.cached) ++out.cached;
    out.latency_ms += c.latency_ms;
  };

  if (is_multi_agent(v)) {
    AgentContext ctx{gw, templates, options.policy};
    AgentOutcome o = v == VariantId::kMultiAgent ? run_majority_vote(ctx, s)
                                                 : run_predictor_critic_judge(ctx, s, v, examples);
    for (const auto& c : o.completions) tally(c);
    if (!o.completions.empty()) out.record.raw_digest = sha256_hex(o.completions.back().text);
    if (!o.ok()) {
      out.record.failure = o.failure;
      return out;
    }
    const AgentTrace& t = *o.trace;
    out.record.label = t.final_label;
    out.record.has_trace = true;
    for (const auto& step : t.steps) {
      for (const auto& r : step.repairs) out.record.repairs.push_back(std::string(role_name(step.role)) + ":" + r);
    }
    if (!t.steps.empty()) {
      const json& f = t.steps.front().fields;
      if (f.contains("step1")) out.record.step1 = f["step1"].get<std::string>();
      if (f.contains("step2")) out.record.step2 = f["step2"].get<std::string>();
    }
    out.trace = t;
    return out;
  }

  PromptBundle bundle;
  switch (v) {
    case VariantId::kZeroShot: bundle = render_zero_shot(templates, s); break;
    case VariantId::kFewShot:
    case VariantId::kFewShotError: bundle = render_few_shot(templates, s, examples, v); break;
    case VariantId::kCot: bundle = render_cot(templates, s, v); break;
    case VariantId::kCotFewShotError: bundle = render_cot_few_shot(templates, s, examples, v); break;
    default: throw ConfigError("unsupported single-agent variant");
  }
  RequestContext rc;
  rc.sentence_id = s.id;
  ClassifyOutcome o = gw.classify(bundle, options.policy, rc);
  tally(o.completion);
  out.record.raw_digest = sha256_hex(o.completion.text);
  if (!o.ok()) {
    out.record.failure = o.failure;
    return out;
  }
  out.record.label = o.prediction->label;
  out.record.step1 = o.prediction->step1;
  out.record.step2 = o.prediction->step2;
  out.record.repairs = o.prediction->repairs;
  return out;
}

std::vector<std::string> sorted_copy(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::defaults(const fs::path& root) {
  ExperimentConfig c;
  c.template_dir = fs::path(DELIB_DATA_DIR) / "templates";
  c.lexicon_dir = fs::path(DELIB_DATA_DIR) / "lexicons";
  c.cache_dir = root / "cache";
  c.runs_dir = root / "runs";
  c.reports_dir = root / "reports";
  BackendConfig mock;
  mock.name = "mock";
  mock.kind = BackendKind::kMock;
  mock.model = "mock";
  c.backends.emplace("mock", mock);
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  ExperimentConfig c = defaults(base_dir);
  auto path_field = [&](const char* key, fs::path& target) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) throw ConfigError(std::string("config: ") + key + " must be a string");
    target = resolve(base_dir, j[key].get<std::string>());
  };
  path_field("template_dir", c.template_dir);
  path_field("lexicon_dir", c.lexicon_dir);
  path_field("cache_dir", c.cache_dir);
  path_field("runs_dir", c.runs_dir);
  path_field("reports_dir", c.reports_dir);
  if (j.contains("backends")) {
    if (!j["backends"].is_object()) throw ConfigError("config: backends must be an object");
    c.backends.clear();
    for (const auto& [name, bj] : j["backends"].items()) {
      BackendConfig b = BackendConfig::from_json(name, bj, base_dir);
      b.validate();
      c.backends.emplace(name, std::move(b));
    }
  }
  static const std::set<std::string> kKnown{"template_dir", "lexicon_dir", "cache_dir", "runs_dir", "reports_dir",
                                            "backends"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + file.string() + ": not valid JSON");
  fs::path base = file.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

const BackendConfig& ExperimentConfig::backend(const std::string& name) const {
  auto it = backends.find(name);
  if (it == backends.end()) {
    std::vector<std::string> names;
    for (const auto& [n, _] : backends) names.push_back(n);
    throw ConfigError("unknown backend '" + name + "' (configured: " + join(names, ", ") + ")");
  }
  return it->second;
}

json ExperimentConfig::to_json() const {
  json b = json::object();
  for (const auto& [name, cfg] : backends) b[name] = cfg.to_json();
  return json{{"template_dir", template_dir.string()}, {"lexicon_dir", lexicon_dir.string()},
              {"cache_dir", cache_dir.string()},       {"runs_dir", runs_dir.string()},
              {"reports_dir", reports_dir.string()},   {"backends", b}};
}

// ---------------------------------------------------------------- records

json RunManifest::to_json() const {
  return json{{"run_id", run_id},
              {"variant", variant_name(variant)},
              {"backend", backend},
              {"backend_digest", backend_digest},
              {"corpus_path", corpus_path},
              {"corpus_digest", corpus_digest},
              {"template_version", template_version},
              {"seed", seed},
              {"k", k},
              {"repair_policy", repair_policy_name(policy)},
              {"batches", batches},
              {"depends_on", depends_on},
              {"n_sentences", n_sentences},
              {"started_at", started_at},
              {"finished_at", finished_at},
              {"counts",
               {{"records", counts.records},
                {"dispatched", counts.dispatched},
                {"cached", counts.cached},
                {"schema_failures", counts.schema_failures}}}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.backend = j.at("backend").get<std::string>();
    m.backend_digest = j.value("backend_digest", "");
    m.corpus_path = j.value("corpus_path", "");
    m.corpus_digest = j.value("corpus_digest", "");
    m.template_version = j.value("template_version", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.k = j.value("k", std::size_t{0});
    m.policy = j.value("repair_policy", "lenient") == "strict" ? RepairPolicy::kStrict : RepairPolicy::kLenient;
    m.batches = j.value("batches", std::vector<std::string>{});
    m.depends_on = j.value("depends_on", std::vector<std::string>{});
    m.n_sentences = j.value("n_sentences", std::size_t{0});
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    if (j.contains("counts")) {
      const json& c = j["counts"];
      m.counts.records = c.value("records", std::size_t{0});
      m.counts.dispatched = c.value("dispatched", std::size_t{0});
      m.counts.cached = c.value("cached", std::size_t{0});
      m.counts.schema_failures = c.value("schema_failures", std::size_t{0});
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

json PredictionRecord::to_json() const {
  json j{{"run_id", run_id}, {"sentence_id", sentence_id}};
  if (label) j["label"] = *label;
  else j["label"] = "FAILURE";
  if (!failure.empty()) j["failure"] = failure;
  if (step1) j["step1"] = *step1;
  if (step2) j["step2"] = *step2;
  if (has_trace) j["trace"] = "traces.jsonl";
  j["raw_digest"] = raw_digest;
  j["repairs"] = repairs;
  return j;
}

PredictionRecord PredictionRecord::from_json(const json& j) {
  try {
    PredictionRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.sentence_id = j.at("sentence_id").get<std::string>();
    const json& l = j.at("label");
    if (l.is_number_integer()) {
      int v = l.get<int>();
      if (v != 0 && v != 1) throw DataError("record label must be 0, 1 or FAILURE");
      r.label = v;
    } else if (!(l.is_string() && l.get<std::string>() == "FAILURE")) {
      throw DataError("record label must be 0, 1 or FAILURE");
    }
    r.failure = j.value("failure", "");
    if (j.contains("step1")) r.step1 = j["step1"].get<std::string>();
    if (j.contains("step2")) r.step2 = j["step2"].get<std::string>();
    r.has_trace = j.contains("trace");
    r.raw_digest = j.value("raw_digest", "");
    r.repairs = j.value("repairs", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
}

// ---------------------------------------------------------------- running

std::string make_run_id(const RunOptions& options, const BackendConfig& backend, const Corpus& scope,
                        const PromptTemplates& templates) {
  const bool uses_examples = uses_random_examples(options.variant) || uses_error_pool(options.variant);
  json key{{"variant", variant_name(options.variant)},
           {"backend", backend.digest()},
           {"corpus", scope.digest()},
           {"templates", templates.version()},
           {"policy", repair_policy_name(options.policy)}};
  if (uses_examples) {
    key["seed"] = options.seed;
    key["k"] = options.k;
  }
  return lower_variant(options.variant) + "__" + backend.name + "__" + sha256_hex(key.dump()).substr(0, 12);
}

std::vector<VariantId> dependency_order(std::vector<VariantId> variants) {
  std::vector<VariantId> out;
  for (VariantId v : kAllVariants) {
    if (std::find(variants.begin(), variants.end(), v) != variants.end()) out.push_back(v);
  }
  std::stable_partition(out.begin(), out.end(), [](VariantId v) { return v == VariantId::kZeroShot; });
  return out;
}

RunLabels LoadedRun::labels() const {
  RunLabels out;
  for (const auto& r : records) out[r.sentence_id] = r.label;
  return out;
}

LoadedRun load_run(const fs::path& runs_dir, const std::string& run_id) {
  fs::path dir = runs_dir / run_id;
  if (!fs::exists(dir / "manifest.json")) throw DataError("unknown run " + run_id + " (no " + (dir / "manifest.json").string() + ")");
  LoadedRun run;
  json m = json::parse(read_file(dir / "manifest.json"), nullptr, false);
  if (m.is_discarded()) throw DataError("manifest of " + run_id + " is not valid JSON");
  run.manifest = RunManifest::from_json(m);
  std::unordered_set<std::string> seen;
  if (fs::exists(dir / "records.jsonl")) {
    for (const auto& line : read_jsonl_lines(dir / "records.jsonl")) {
      PredictionRecord r = PredictionRecord::from_json(json::parse(line));
      if (r.run_id != run.manifest.run_id) throw DataError("record in " + run_id + " names run " + r.run_id);
      if (!seen.insert(r.sentence_id).second) throw DataError("duplicate record for " + r.sentence_id);
      run.records.push_back(std::move(r));
    }
  }
  if (fs::exists(dir / "traces.jsonl")) {
    for (const auto& line : read_jsonl_lines(dir / "traces.jsonl")) {
      run.traces.push_back(AgentTrace::from_json(json::parse(line)));
    }
  }
  return run;
}

Corpus load_run_corpus(const LoadedRun& run, const std::optional<fs::path>& override_path) {
  fs::path path = override_path ? *override_path : fs::path(run.manifest.corpus_path);
  if (path.empty()) throw DataError("run " + run.manifest.run_id + " does not record its corpus; pass --corpus");
  Corpus corpus = load_corpus(path);
  if (!run.manifest.batches.empty()) {
    corpus = filter_batches(corpus, {run.manifest.batches.begin(), run.manifest.batches.end()});
  }
  if (corpus.digest() != run.manifest.corpus_digest) {
    throw DataError("corpus " + path.string() + " does not match the one run " + run.manifest.run_id + " was made on");
  }
  return corpus;
}

RunResult run_variant(const ExperimentConfig& config, const RunOptions& options, const Corpus& corpus,
                      const std::string& corpus_path, Gateway* gateway) {
  const BackendConfig& backend = config.backend(options.backend);
  const PromptTemplates templates = PromptTemplates::load(config.template_dir);

  std::vector<std::string> warnings;
  Corpus scope = options.batches.empty() ? corpus : filter_batches(corpus, options.batches, &warnings);
  if (!warnings.empty()) throw DataError("batches not in corpus: " + join(warnings, ", "));
  if (scope.empty()) throw DataError("nothing to classify: the selected scope is empty");

  std::unique_ptr<Gateway> owned;
  if (!gateway) {
    owned = Gateway::open(backend, config.cache_dir);
    gateway = owned.get();
  }
  const std::size_t calls_before = gateway->network_calls();
  const std::size_t hits_before = gateway->cache_hits();

  const std::string run_id = make_run_id(options, backend, scope, templates);
  const fs::path dir = config.runs_dir / run_id;
  fs::create_directories(dir);

  // Dependency: the zero-shot run that defines the error pool.
  std::optional<RunLabels> zero_shot;
  std::vector<std::string> depends_on;
  if (uses_error_pool(options.variant)) {
    RunOptions zs = options;
    zs.variant = VariantId::kZeroShot;
    const std::string zs_id = make_run_id(zs, backend, scope, templates);
    if (!fs::exists(config.runs_dir / zs_id / "manifest.json")) {
      throw DataError(std::string(variant_name(options.variant)) + " needs a finished ZERO_SHOT run on backend " +
                      backend.name + " over the same scope (missing " + zs_id + ")");
    }
    LoadedRun zr = load_run(config.runs_dir, zs_id);
    if (!zr.manifest.finished()) {
      throw DataError("dependency run " + zs_id + " is unfinished; resume it first");
    }
    zero_shot = zr.labels();
    depends_on.push_back(zs_id);
  }

  RunManifest manifest;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    json m = json::parse(read_file(manifest_path), nullptr, false);
    if (m.is_discarded()) throw DataError("manifest of " + run_id + " is not valid JSON");
    manifest = RunManifest::from_json(m);
  } else {
    manifest.started_at = utc_now_iso8601();
  }
  manifest.run_id = run_id;
  manifest.variant = options.variant;
  manifest.backend = backend.name;
  manifest.backend_digest = backend.digest();
  manifest.corpus_path = corpus_path;
  manifest.corpus_digest = scope.digest();
  manifest.template_version = templates.version();
  const bool uses_examples = uses_random_examples(options.variant) || uses_error_pool(options.variant);
  manifest.seed = uses_examples ? options.seed : 0;
  manifest.k = uses_examples ? options.k : 0;
  manifest.policy = options.policy;
  manifest.batches = sorted_copy(options.batches);
  manifest.depends_on = depends_on;
  manifest.n_sentences = scope.size();

  // Existing records (a torn final line from a kill is dropped here).
  std::unordered_map<std::string, std::string> record_lines;
  std::unordered_map<std::string, std::string> trace_lines;
  std::vector<std::string> timing_lines;
  if (fs::exists(dir / "records.jsonl")) {
    for (auto& line : read_jsonl_lines(dir / "records.jsonl")) {
      PredictionRecord r = PredictionRecord::from_json(json::parse(line));
      if (!scope.find(r.sentence_id)) throw DataError("record for sentence outside the run scope: " + r.sentence_id);
      record_lines.emplace(r.sentence_id, std::move(line));
    }
  }
  if (fs::exists(dir / "traces.jsonl")) {
    for (auto& line : read_jsonl_lines(dir / "traces.jsonl")) {
      std::string id = json::parse(line).at("sentence_id").get<std::string>();
      if (record_lines.count(id)) trace_lines.emplace(id, std::move(line));
    }
  }
  if (fs::exists(dir / "timings.jsonl")) timing_lines = read_jsonl_lines(dir / "timings.jsonl");
  {
    // Rewrite cleanly so appends never land on a torn fragment.
    std::vector<std::string> recs, trs;
    for (const auto& s : scope.sentences()) {
      if (auto it = record_lines.find(s.id); it != record_lines.end()) recs.push_back(it->second);
      if (auto it = trace_lines.find(s.id); it != trace_lines.end()) trs.push_back(it->second);
    }
    rewrite_lines(dir / "records.jsonl", recs);
    rewrite_lines(dir / "traces.jsonl", trs);
    rewrite_lines(dir / "timings.jsonl", timing_lines);
  }

  manifest.finished_at.clear();
  manifest.counts.records = record_lines.size();
  write_file_atomic(manifest_path, manifest.to_json().dump(2) + "\n");

  std::vector<const Sentence*> pending;
  for (const auto& s : scope.sentences()) {
    if (!record_lines.count(s.id)) pending.push_back(&s);
  }

  // Examples per target batch, only for batches with pending work.
  std::unordered_map<std::string, std::vector<Example>> examples;
  if (uses_examples && !pending.empty()) {
    std::set<std::string> needed;
    for (const Sentence* s : pending) needed.insert(s->batch);
    ReasoningCache reasoning(config.cache_dir / backend.name / "reasoning.jsonl");
    for (const auto& batch : needed) {
      switch (options.variant) {
        case VariantId::kFewShot:
          examples[batch] = select_few_shot_examples(scope, batch, options.k, options.seed);
          break;
        case VariantId::kFewShotError: {
          auto pool = build_error_pool(*zero_shot, scope, batch);
          examples[batch] = select_from_pool(pool, batch, options.k, options.seed);
          break;
        }
        case VariantId::kCotFewShotError:
        case VariantId::kCotFewShotErrorMultiAgent: {
          auto pool = build_error_pool(*zero_shot, scope, batch);
          examples[batch] = select_reasoned_examples(pool, batch, options.k, options.seed, *gateway, templates,
                                                     reasoning, options.policy);
          break;
        }
        default: break;
      }
    }
  }

  RunResult result;
  std::size_t limit = pending.size();
  if (options.stop_after) limit = std::min(limit, *options.stop_after);
  {
    RunWriter writer(dir);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::atomic<std::size_t> written{0};
    std::exception_ptr error;
    std::mutex error_mu;
    const std::vector<Example> no_examples;

    auto worker = [&] {
      while (!abort.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= limit) return;
        const Sentence& s = *pending[i];
        try {
          auto it = examples.find(s.batch);
          SentenceResult r = process_sentence(options, run_id, s, it == examples.end() ? no_examples : it->second,
                                              *gateway, templates);
          json timing{{"sentence_id", s.id}, {"latency_ms", r.latency_ms}, {"calls", r.calls}, {"cached", r.cached}};
          writer.write(r.record, r.trace, timing);
          written.fetch_add(1);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          abort.store(true);
        }
      }
    };
    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(backend.limits.max_in_flight, limit));
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t + 1 < n_workers; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    result.new_records = written.load();

    manifest.counts.dispatched += gateway->network_calls() - calls_before;
    manifest.counts.cached += gateway->cache_hits() - hits_before;
    if (error) {
      manifest.counts.records = record_lines.size() + result.new_records;
      write_file_atomic(manifest_path, manifest.to_json().dump(2) + "\n");
      std::rethrow_exception(error);
    }
  }
  result.network_calls = gateway->network_calls() - calls_before;

  // Compact into corpus order and recount from the records themselves.
  LoadedRun loaded = load_run(config.runs_dir, run_id);
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& r : loaded.records) by_id.emplace(r.sentence_id, &r);
  std::unordered_map<std::string, const AgentTrace*> trace_by_id;
  for (const auto& t : loaded.traces) trace_by_id.emplace(t.sentence_id, &t);
  std::vector<std::string> recs, trs;
  std::size_t failures = 0;
  for (const auto& s : scope.sentences()) {
    if (auto it = by_id.find(s.id); it != by_id.end()) {
      recs.push_back(it->second->to_json().dump());
      if (!it->second->label) ++failures;
    }
    if (auto it = trace_by_id.find(s.id); it != trace_by_id.end()) trs.push_back(it->second->to_json().dump());
  }
  manifest.counts.records = recs.size();
  manifest.counts.schema_failures = failures;
  if (recs.size() == scope.size()) {
    rewrite_lines(dir / "records.jsonl", recs);
    rewrite_lines(dir / "traces.jsonl", trs);
    manifest.finished_at = utc_now_iso8601();
  }
  write_file_atomic(manifest_path, manifest.to_json().dump(2) + "\n");
  result.manifest = manifest;
  return result;
}

}  // namespace delib
