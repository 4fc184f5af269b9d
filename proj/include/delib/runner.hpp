#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "delib/agents.hpp"
#include "delib/corpus.hpp"
#include "delib/gateway.hpp"
#include "delib/labels.hpp"
#include "delib/prompting.hpp"

namespace delib {

// One experiment document: backends plus the directories everything lives in.
// Relative paths resolve against the config file's directory.
struct ExperimentConfig {
  std::map<std::string, BackendConfig> backends;
  std::filesystem::path template_dir;
  std::filesystem::path lexicon_dir;
  std::filesystem::path cache_dir;
  std::filesystem::path runs_dir;
  std::filesystem::path reports_dir;

  static ExperimentConfig load(const std::filesystem::path& file);
  // Shipped templates and lexicons, a single "mock" backend labelling every
  // sentence 1, and cache/runs/reports under `root`.
  static ExperimentConfig defaults(const std::filesystem::path& root = ".");
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  const BackendConfig& backend(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct RunCounts {
  std::size_t records = 0;
  std::size_t dispatched = 0;  // backend calls, cumulative over resumes
  std::size_t cached = 0;      // cache hits, cumulative over resumes
  std::size_t schema_failures = 0;

  bool operator==(const RunCounts&) const = default;
};

struct RunManifest {
  std::string run_id;
  VariantId variant = VariantId::kZeroShot;
  std::string backend;
  std::string backend_digest;
  std::string corpus_path;
  std::string corpus_digest;
  std::string template_version;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  RepairPolicy policy = RepairPolicy::kLenient;
  std::vector<std::string> batches;  // scope; empty = whole corpus
  std::vector<std::string> depends_on;
  std::size_t n_sentences = 0;
  std::string started_at;
  std::string finished_at;  // empty until every sentence has a record
  RunCounts counts;

  bool finished() const { return !finished_at.empty(); }
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

struct PredictionRecord {
  std::string run_id;
  std::string sentence_id;
  std::optional<int> label;  // nullopt = schema failure
  std::string failure;
  std::optional<std::string> step1;
  std::optional<std::string> step2;
  bool has_trace = false;  // multi-agent: see traces.jsonl
  std::string raw_digest;
  std::vector<std::string> repairs;

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
};

struct RunOptions {
  VariantId variant = VariantId::kZeroShot;
  std::string backend = "mock";
  std::set<std::string> batches;  // empty = every batch in the corpus
  std::size_t k = 5;
  std::uint64_t seed = 42;
  RepairPolicy policy = RepairPolicy::kLenient;
  // Stop after this many new records, leaving the run unfinished.
  std::optional<std::size_t> stop_after;
};

struct RunResult {
  RunManifest manifest;
  std::size_t new_records = 0;
  std::size_t network_calls = 0;  // made by this invocation
};

// Deterministic id: <variant>__<backend>__<digest of everything that
// determines the outputs>.
std::string make_run_id(const RunOptions& options, const BackendConfig& backend, const Corpus& scope,
                        const PromptTemplates& templates);

// Runs (or resumes) one variant. Sentences that already have a record are
// skipped. Error-pool variants need a finished ZERO_SHOT run with the same
// backend and scope. A null gateway opens one from the config.
RunResult run_variant(const ExperimentConfig& config, const RunOptions& options, const Corpus& corpus,
                      const std::string& corpus_path, Gateway* gateway = nullptr);

// Zero-shot first, then the rest in their canonical order.
std::vector<VariantId> dependency_order(std::vector<VariantId> variants);

struct LoadedRun {
  RunManifest manifest;
  std::vector<PredictionRecord> records;
  std::vector<AgentTrace> traces;

  RunLabels labels() const;
};

LoadedRun load_run(const std::filesystem::path& runs_dir, const std::string& run_id);
// Loads the corpus the run was made on and checks its digest.
Corpus load_run_corpus(const LoadedRun& run, const std::optional<std::filesystem::path>& override_path = {});

}  // namespace delib
