#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace delib {

// One annotated sentence. gold_label is 1 for "always deliberative" (AD).
struct Sentence {
  std::string id;
  std::string batch;
  std::string text;  // as annotated; never normalized
  int gold_label = 0;

  bool operator==(const Sentence&) const = default;
};

struct SourceManifest {
  std::vector<std::string> paths;
  std::string format;
  std::string ingested_at;
};

// Ordered, id-unique collection of sentences. Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  // Throws DataError on duplicate ids, empty text or non-binary labels.
  explicit Corpus(std::vector<Sentence> sentences, SourceManifest source = {});

  const std::vector<Sentence>& sentences() const { return sentences_; }
  const SourceManifest& source() const { return source_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }

  const Sentence* find(std::string_view id) const;
  // Distinct batch codes in order of first appearance.
  std::vector<std::string> batches() const;
  // SHA-256 over the canonical JSONL serialization.
  std::string digest() const;

  bool operator==(const Corpus& other) const { return sentences_ == other.sentences_; }

 private:
  std::vector<Sentence> sentences_;
  SourceManifest source_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class IngestFormat { kJsonl, kDelimited };

// "jsonl" | "csv" | "tsv" | "dsv". Throws ConfigError otherwise.
IngestFormat parse_ingest_format(std::string_view tag);

// Column aliases for delimiter-separated tables. Matching is case-insensitive.
struct DelimitedOptions {
  char delimiter = '\0';  // '\0' picks tab for .tsv/.tab files, comma otherwise
  std::vector<std::string> text_columns{"sentence", "text"};
  std::vector<std::string> batch_columns{"batch", "batch_id", "collection"};
  std::vector<std::string> label_columns{"label", "ad", "deliberative", "gold_label", "class"};
  // Used when the table has no batch column; "" derives the batch from the
  // file stem (e.g. K1.csv -> K1).
  std::string default_batch;
};

// Reads a file, or every matching file of a directory in name order.
Corpus parse_dataset(const std::filesystem::path& source, IngestFormat format,
                     const DelimitedOptions& options = {});

// Canonical corpus file (JSONL with id, batch, text, label).
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);

// Sentences whose batch is in `include`, order preserved. Names absent from
// the corpus are reported through `warnings` rather than failing.
Corpus filter_batches(const Corpus& corpus, const std::set<std::string>& include,
                      std::vector<std::string>* warnings = nullptr);

struct BatchStats {
  std::string batch;  // "ALL" for the aggregate row
  std::size_t n_sentences = 0;
  std::size_t n_ad = 0;
  double ad_fraction = 0.0;
};

// One row per batch in first-appearance order, then the "ALL" aggregate.
std::vector<BatchStats> corpus_stats(const Corpus& corpus);
std::string format_stats_table(const std::vector<BatchStats>& stats);
std::string format_stats_csv(const std::vector<BatchStats>& stats);

// Digest over batch and the NFC-normalized, whitespace-collapsed text.
std::string sentence_id(std::string_view batch, std::string_view text);

// Parses a gold label cell: 0/1, true/false, AD/Non-AD. Returns -1 if the
// value is not a recognizable binary label.
int parse_label_token(std::string_view token);

}  // namespace delib
