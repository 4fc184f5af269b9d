#include "delib/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "delib/agents.hpp"
#include "delib/corpus.hpp"
#include "delib/errors.hpp"
#include "delib/evaluation.hpp"
#include "delib/indicators.hpp"
#include "delib/runner.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::set<std::string> parse_batch_list(const std::string& csv) {
  std::set<std::string> out;
  for (const auto& part : split(csv, ',')) {
    std::string t = trim(part);
    if (!t.empty()) out.insert(t);
  }
  return out;
}

std::vector<std::string> parse_id_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    for (const auto& part : split(item, ',')) {
      std::string t = trim(part);
      if (!t.empty()) out.push_back(t);
    }
  }
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  if (!path.empty()) return ExperimentConfig::load(path);
  if (fs::exists("delib.json")) return ExperimentConfig::load("delib.json");
  return ExperimentConfig::defaults(".");
}

void write_report(const fs::path& dir, const std::string& name, const std::string& body) {
  fs::create_directories(dir);
  write_file_atomic(dir / name, body);
}

std::string multi_run_id(const std::string& prefix, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return prefix + "__" + sha256_hex(join(ids, "\n")).substr(0, 12);
}

struct Args {
  std::string config;
  // ingest
  std::string input, format = "jsonl", out_path, batches, default_batch, delimiter;
  // stats / run / analyze
  std::string corpus;
  bool csv = false;
  std::string variant, backend = "mock";
  std::size_t k = 5;
  std::uint64_t seed = 42;
  bool strict = false;
  std::size_t stop_after = 0;
  // eval / compare / analyze / disagreements
  std::string run;
  std::vector<std::string> runs;
  bool per_batch = false;
  bool failures_as_negative = false;
  bool baselines = false;
  std::size_t top_k = 10;
};

int cmd_ingest(const Args& a, std::ostream& out) {
  DelimitedOptions opts;
  opts.default_batch = a.default_batch;
  if (!a.delimiter.empty()) {
    if (a.delimiter == "\\t" || a.delimiter == "tab") opts.delimiter = '\t';
    else if (a.delimiter.size() == 1) opts.delimiter = a.delimiter[0];
    else throw UsageError("--delimiter must be a single character or 'tab'");
  }
  Corpus corpus = parse_dataset(a.input, parse_ingest_format(a.format), opts);
  if (!a.batches.empty()) {
    std::vector<std::string> warnings;
    corpus = filter_batches(corpus, parse_batch_list(a.batches), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  }
  std::ostringstream body;
  write_corpus_jsonl(corpus, body);
  fs::path out_path = a.out_path;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_file_atomic(out_path, body.str());
  out << "wrote " << corpus.size() << " sentences to " << out_path.string() << "\n";
  out << format_stats_table(corpus_stats(corpus));
  return 0;
}

int cmd_stats(const Args& a, std::ostream& out) {
  Corpus corpus = load_corpus(a.corpus);
  if (!a.batches.empty()) corpus = filter_batches(corpus, parse_batch_list(a.batches));
  auto stats = corpus_stats(corpus);
  out << (a.csv ? format_stats_csv(stats) : format_stats_table(stats));
  return 0;
}

int cmd_run(const Args& a, std::ostream& out) {
  ExperimentConfig config = load_config(a.config);
  Corpus corpus = load_corpus(a.corpus);
  std::vector<VariantId> variants;
  if (to_lower(a.variant) == "all") variants.assign(kAllVariants.begin(), kAllVariants.end());
  else {
    for (const auto& v : split(a.variant, ',')) variants.push_back(parse_variant(trim(v)));
  }
  variants = dependency_order(variants);
  const BackendConfig& backend = config.backend(a.backend);
  auto gateway = Gateway::open(backend, config.cache_dir);
  for (VariantId v : variants) {
    RunOptions opts;
    opts.variant = v;
    opts.backend = a.backend;
    opts.batches = parse_batch_list(a.batches);
    opts.k = a.k;
    opts.seed = a.seed;
    opts.policy = a.strict ? RepairPolicy::kStrict : RepairPolicy::kLenient;
    if (a.stop_after > 0) opts.stop_after = a.stop_after;
    RunResult r = run_variant(config, opts, corpus, fs::absolute(a.corpus).string(), gateway.get());
    const auto& c = r.manifest.counts;
    out << r.manifest.run_id << ": " << c.records << "/" << r.manifest.n_sentences << " records (" << r.new_records
        << " new), " << r.network_calls << " backend calls, " << c.schema_failures << " schema failures"
        << (r.manifest.finished() ? "" : ", unfinished") << "\n";
  }
  return 0;
}

struct EvalOutputs {
  std::vector<MetricsReport> reports;
  LoadedRun run;
};

EvalOutputs evaluate_loaded(const ExperimentConfig& config, const std::string& run_id, bool per_batch,
                            bool failures_as_negative, const std::string& corpus_override) {
  EvalOutputs o;
  o.run = load_run(config.runs_dir, run_id);
  if (!o.run.manifest.finished()) {
    throw DataError("run " + run_id + " is unfinished (" + std::to_string(o.run.records.size()) + "/" +
                    std::to_string(o.run.manifest.n_sentences) + " records); resume it first");
  }
  Corpus corpus = load_run_corpus(
      o.run, corpus_override.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{corpus_override});
  std::vector<std::string> scopes;
  if (per_batch) scopes = corpus.batches();
  scopes.push_back("ALL");
  o.reports = evaluate_run(o.run.labels(), corpus, scopes, ConfusionOptions{failures_as_negative});
  return o;
}

int cmd_eval(const Args& a, std::ostream& out) {
  ExperimentConfig config = load_config(a.config);
  EvalOutputs o = evaluate_loaded(config, a.run, a.per_batch, a.failures_as_negative, a.corpus);
  std::ostringstream text;
  text << "run " << a.run << " (" << variant_label(o.run.manifest.variant) << ", backend "
       << o.run.manifest.backend << ")\n";
  text << "schema failures " << (a.failures_as_negative ? "counted as negative" : "excluded") << "\n";
  text << format_metrics_table(o.reports);
  json j{{"run_id", a.run},
         {"variant", variant_name(o.run.manifest.variant)},
         {"backend", o.run.manifest.backend},
         {"failures_as_negative", a.failures_as_negative},
         {"scopes", json::array()}};
  for (const auto& r : o.reports) j["scopes"].push_back(r.to_json());
  fs::path dir = config.reports_dir / a.run;
  write_report(dir, "eval.txt", text.str());
  write_report(dir, "eval.csv", metrics_csv(o.reports));
  write_report(dir, "eval.json", j.dump(2) + "\n");
  out << text.str();
  return 0;
}

int cmd_compare(const Args& a, std::ostream& out) {
  ExperimentConfig config = load_config(a.config);
  std::vector<std::string> ids = parse_id_list(a.runs);
  if (ids.empty()) throw UsageError("--runs needs at least one run id");
  std::vector<ComparisonEntry> entries;
  if (a.baselines) entries = reference_baselines();
  for (const auto& id : ids) {
    EvalOutputs o = evaluate_loaded(config, id, true, a.failures_as_negative, a.corpus);
    entries.push_back({o.run.manifest.backend, std::string(variant_label(o.run.manifest.variant)), o.reports, false});
  }
  ComparisonTable table = compare_runs(entries);
  fs::path dir = config.reports_dir / multi_run_id("compare", ids);
  json j = json::array();
  for (const auto& r : table.rows) {
    j.push_back({{"group", r.group},
                 {"variant", r.variant},
                 {"reference", r.reference},
                 {"precision", r.values[0]},
                 {"recall", r.values[1]},
                 {"f1", r.values[2]},
                 {"f2", r.values[3]},
                 {"mcc", r.values[4]}});
  }
  write_report(dir, "compare.txt", table.text());
  write_report(dir, "compare.csv", table.csv());
  write_report(dir, "per_batch_series.csv", table.series_csv());
  write_report(dir, "compare.json", json{{"runs", ids}, {"rows", j}}.dump(2) + "\n");
  out << table.text();
  out << "reports: " << dir.string() << "\n";
  return 0;
}

int cmd_analyze(const Args& a, std::ostream& out) {
  ExperimentConfig config = load_config(a.config);
  std::vector<std::string> ids = parse_id_list(a.runs);
  Corpus corpus = load_corpus(a.corpus);
  if (!a.batches.empty()) corpus = filter_batches(corpus, parse_batch_list(a.batches));
  std::vector<RunLabels> runs;
  for (const auto& id : ids) runs.push_back(load_run(config.runs_dir, id).labels());
  Lexicons lex = Lexicons::load(config.lexicon_dir);
  IndicatorAnalysis analysis = analyze_indicators(runs, corpus, lex, a.top_k);
  fs::path dir = config.reports_dir / multi_run_id("analyze", ids);
  std::string text = analysis.text(corpus);
  write_report(dir, "analysis.txt", text);
  write_report(dir, "occurrence.csv", analysis.occurrence_csv());
  write_report(dir, "verbs.csv", analysis.verbs_csv());
  json j = analysis.to_json();
  j["runs"] = ids;
  write_report(dir, "analysis.json", j.dump(2) + "\n");
  out << text;
  out << "reports: " << dir.string() << "\n";
  return 0;
}

int cmd_disagreements(const Args& a, std::ostream& out) {
  ExperimentConfig config = load_config(a.config);
  LoadedRun run = load_run(config.runs_dir, a.run);
  if (!is_multi_agent(run.manifest.variant)) {
    throw UsageError("run " + a.run + " is not a multi-agent run");
  }
  Corpus corpus = load_run_corpus(
      run, a.corpus.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{a.corpus});
  DisagreementReport report = analyze_disagreements(run.traces, corpus);
  std::string text = format_disagreement_report(report);
  fs::path dir = config.reports_dir / a.run;
  write_report(dir, "disagreements.txt", text);
  write_report(dir, "disagreements.csv", disagreement_report_csv(report));
  write_report(dir, "disagreements.json", report.to_json().dump(2) + "\n");
  out << text;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deliberative-language classification experiments"};
  app.require_subcommand(1);
  Args a;
  app.add_option("--config", a.config, "Experiment config (JSON); defaults to ./delib.json if present");

  auto* ingest = app.add_subcommand("ingest", "Convert a labelled dataset into a corpus file");
  ingest->add_option("--input", a.input, "Dataset file or directory")->required();
  ingest->add_option("--format", a.format, "jsonl | csv | tsv");
  ingest->add_option("--out", a.out_path, "Output corpus (JSONL)")->required();
  ingest->add_option("--batches", a.batches, "Keep only these batches (comma-separated)");
  ingest->add_option("--default-batch", a.default_batch, "Batch for tables without a batch column");
  ingest->add_option("--delimiter", a.delimiter, "Field delimiter for delimited input");

  auto* stats = app.add_subcommand("stats", "Per-batch sentence and AD counts");
  stats->add_option("--corpus", a.corpus, "Corpus file")->required();
  stats->add_option("--batches", a.batches, "Restrict to these batches");
  stats->add_flag("--csv", a.csv, "CSV output");

  auto* run = app.add_subcommand("run", "Classify a corpus with one variant (or all)");
  run->add_option("--variant", a.variant, "Variant id, comma list, or 'all'")->required();
  run->add_option("--backend", a.backend, "Backend name from the config");
  run->add_option("--corpus", a.corpus, "Corpus file")->required();
  run->add_option("--batches", a.batches, "Batches in scope (comma-separated)");
  run->add_option("--k", a.k, "Few-shot examples per prompt")->check(CLI::PositiveNumber);
  run->add_option("--seed", a.seed, "Example sampling seed");
  run->add_flag("--strict-schema", a.strict, "Reject any response that does not match the schema exactly");
  run->add_option("--stop-after", a.stop_after, "Stop after N new records (leaves the run resumable)");

  auto* eval = app.add_subcommand("eval", "Metrics for a finished run");
  eval->add_option("--run", a.run, "Run id")->required();
  eval->add_flag("--per-batch", a.per_batch, "Also report each batch");
  eval->add_flag("--failures-as-negative", a.failures_as_negative, "Count schema failures as non-AD");
  eval->add_option("--corpus", a.corpus, "Corpus file (defaults to the one recorded in the run)");

  auto* compare = app.add_subcommand("compare", "Side-by-side metrics grid of several runs");
  compare->add_option("--runs", a.runs, "Run ids (comma-separated or repeated)")->required();
  compare->add_flag("--baselines", a.baselines, "Include the published trained-classifier rows");
  compare->add_flag("--failures-as-negative", a.failures_as_negative, "Count schema failures as non-AD");
  compare->add_option("--corpus", a.corpus, "Corpus file override");

  auto* analyze = app.add_subcommand("analyze", "Easy sets and linguistic indicator tables");
  analyze->add_option("--runs", a.runs, "Run ids (at least two)")->required();
  analyze->add_option("--corpus", a.corpus, "Corpus file")->required();
  analyze->add_option("--batches", a.batches, "Restrict to these batches");
  analyze->add_option("--top-k", a.top_k, "Verbs listed per easy set")->check(CLI::PositiveNumber);

  auto* dis = app.add_subcommand("disagreements", "How the judge resolved predictor/critic disagreements");
  dis->add_option("--run", a.run, "Multi-agent run id")->required();
  dis->add_option("--corpus", a.corpus, "Corpus file override");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (ingest->parsed()) return cmd_ingest(a, out);
    if (stats->parsed()) return cmd_stats(a, out);
    if (run->parsed()) return cmd_run(a, out);
    if (eval->parsed()) return cmd_eval(a, out);
    if (compare->parsed()) return cmd_compare(a, out);
    if (analyze->parsed()) return cmd_analyze(a, out);
    if (dis->parsed()) return cmd_disagreements(a, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace delib
