#include "delib/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) return std::string(text);
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) return std::string(text);
  std::string out;
  dst.toUTF8String(out);
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

struct RawRow {
  std::string batch;
  std::string text;
  int label;
  std::string id;  // optional, canonical JSONL only
};

// Assigns content ids; repeated (batch, text) pairs get "-2", "-3", ... suffixes.
std::vector<Sentence> assign_ids(std::vector<RawRow> rows) {
  std::map<std::string, int> seen;
  std::vector<Sentence> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    std::string id = r.id;
    if (id.empty()) {
      id = sentence_id(r.batch, r.text);
      const int n = ++seen[id];
      if (n > 1) id += "-" + std::to_string(n);
    }
    out.push_back(Sentence{std::move(id), std::move(r.batch), std::move(r.text), r.label});
  }
  return out;
}

std::vector<std::filesystem::path> source_files(const std::filesystem::path& source,
                                                IngestFormat format) {
  namespace fs = std::filesystem;
  if (!fs::exists(source)) throw DataError("source does not exist: " + source.string());
  if (!fs::is_directory(source)) return {source};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(source)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = to_lower(entry.path().extension().string());
    const bool match = format == IngestFormat::kJsonl
                           ? ext == ".jsonl"
                           : (ext == ".csv" || ext == ".tsv" || ext == ".tab" || ext == ".txt");
    if (match) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no input files in " + source.string());
  return files;
}

std::vector<RawRow> read_jsonl_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<RawRow> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(where + ": expected an object");
    RawRow row;
    if (!j.contains("text") || !j["text"].is_string()) throw DataError(where + ": missing text");
    row.text = j["text"].get<std::string>();
    if (j.contains("batch") && j["batch"].is_string()) row.batch = j["batch"].get<std::string>();
    if (row.batch.empty()) throw DataError(where + ": missing batch");
    if (!j.contains("label")) throw DataError(where + ": missing label");
    const json& lab = j["label"];
    if (lab.is_number_integer()) {
      const auto v = lab.get<long long>();
      row.label = (v == 0 || v == 1) ? static_cast<int>(v) : -1;
    } else if (lab.is_boolean()) {
      row.label = lab.get<bool>() ? 1 : 0;
    } else if (lab.is_string()) {
      row.label = parse_label_token(lab.get<std::string>());
    } else {
      row.label = -1;
    }
    if (row.label < 0) throw DataError(where + ": non-binary label " + lab.dump());
    if (trim(row.text).empty()) throw DataError(where + ": empty text");
    if (j.contains("id") && j["id"].is_string()) row.id = j["id"].get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

// RFC 4180-style records: quoted fields, doubled quotes, embedded newlines.
struct CsvRecord {
  size_t line;
  std::vector<std::string> fields;
};

std::vector<CsvRecord> parse_delimited(std::string_view body, char delim) {
  std::vector<CsvRecord> records;
  CsvRecord cur{1, {}};
  std::string field;
  bool in_quotes = false;
  bool any = false;
  size_t line = 1;
  auto end_record = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    const bool blank = cur.fields.size() == 1 && trim(cur.fields[0]).empty();
    if (!blank) records.push_back(std::move(cur));
    cur = CsvRecord{line, {}};
    any = false;
  };
  size_t i = 0;
  if (body.size() >= 3 && body.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < body.size(); ++i) {
    const char c = body[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < body.size() && body[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      any = true;
    } else if (c == delim) {
      cur.fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (any || !field.empty()) end_record();
  return records;
}

int find_column(const std::vector<std::string>& header, const std::vector<std::string>& aliases) {
  for (const auto& alias : aliases) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (to_lower(trim(header[i])) == to_lower(alias)) return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<RawRow> read_delimited_rows(const std::filesystem::path& path,
                                        const DelimitedOptions& opt) {
  char delim = opt.delimiter;
  if (delim == '\0') {
    const std::string ext = to_lower(path.extension().string());
    delim = (ext == ".tsv" || ext == ".tab") ? '\t' : ',';
  }
  const auto records = parse_delimited(read_file(path), delim);
  if (records.empty()) return {};
  const auto& header = records.front().fields;
  const int text_col = find_column(header, opt.text_columns);
  const int batch_col = find_column(header, opt.batch_columns);
  const int label_col = find_column(header, opt.label_columns);
  if (text_col < 0) throw DataError(path.string() + ": no text column (tried " + join(opt.text_columns, ", ") + ")");
  if (label_col < 0) throw DataError(path.string() + ": no label column (tried " + join(opt.label_columns, ", ") + ")");
  const std::string fallback_batch =
      opt.default_batch.empty() ? path.stem().string() : opt.default_batch;

  std::vector<RawRow> rows;
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path.string() + ":" + std::to_string(rec.line);
    auto cell = [&](int col) -> std::string {
      return col >= 0 && static_cast<size_t>(col) < rec.fields.size() ? rec.fields[col] : std::string();
    };
    RawRow row;
    row.text = cell(text_col);
    if (trim(row.text).empty()) throw DataError(where + ": missing text");
    row.batch = batch_col >= 0 ? trim(cell(batch_col)) : fallback_batch;
    if (row.batch.empty()) throw DataError(where + ": missing batch");
    row.label = parse_label_token(cell(label_col));
    if (row.label < 0) throw DataError(where + ": non-binary label '" + cell(label_col) + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

json sentence_to_json(const Sentence& s) {
  return json{{"id", s.id}, {"batch", s.batch}, {"text", s.text}, {"label", s.gold_label}};
}

}  // namespace

Corpus::Corpus(std::vector<Sentence> sentences, SourceManifest source)
    : sentences_(std::move(sentences)), source_(std::move(source)) {
  index_.reserve(sentences_.size());
  for (size_t i = 0; i < sentences_.size(); ++i) {
    const auto& s = sentences_[i];
    if (trim(s.text).empty()) throw DataError("sentence " + s.id + ": empty text");
    if (s.gold_label != 0 && s.gold_label != 1) throw DataError("sentence " + s.id + ": non-binary label");
    if (!index_.emplace(s.id, i).second) throw DataError("duplicate sentence id " + s.id);
  }
}

const Sentence* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &sentences_[it->second];
}

std::vector<std::string> Corpus::batches() const {
  std::vector<std::string> out;
  for (const auto& s : sentences_) {
    if (std::find(out.begin(), out.end(), s.batch) == out.end()) out.push_back(s.batch);
  }
  return out;
}

std::string Corpus::digest() const {
  std::ostringstream ss;
  write_corpus_jsonl(*this, ss);
  return sha256_hex(ss.str());
}

IngestFormat parse_ingest_format(std::string_view tag) {
  const std::string t = to_lower(tag);
  if (t == "jsonl") return IngestFormat::kJsonl;
  if (t == "csv" || t == "tsv" || t == "dsv") return IngestFormat::kDelimited;
  throw ConfigError("unknown ingest format '" + std::string(tag) + "' (expected jsonl, csv, tsv or dsv)");
}

Corpus parse_dataset(const std::filesystem::path& source, IngestFormat format,
                     const DelimitedOptions& options) {
  SourceManifest manifest;
  manifest.format = format == IngestFormat::kJsonl ? "jsonl" : "delimited";
  manifest.ingested_at = utc_now_iso8601();
  std::vector<RawRow> rows;
  for (const auto& file : source_files(source, format)) {
    auto part = format == IngestFormat::kJsonl ? read_jsonl_rows(file) : read_delimited_rows(file, options);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    manifest.paths.push_back(file.string());
  }
  if (rows.empty()) throw DataError("no records in " + source.string());
  return Corpus(assign_ids(std::move(rows)), std::move(manifest));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_dataset(path, IngestFormat::kJsonl);
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus.sentences()) out << sentence_to_json(s).dump() << '\n';
}

Corpus filter_batches(const Corpus& corpus, const std::set<std::string>& include,
                      std::vector<std::string>* warnings) {
  if (include.empty()) throw ConfigError("batch filter is empty");
  const auto present = corpus.batches();
  for (const auto& b : include) {
    if (std::find(present.begin(), present.end(), b) == present.end() && warnings) {
      warnings->push_back("batch " + b + " not present in corpus");
    }
  }
  std::vector<Sentence> kept;
  for (const auto& s : corpus.sentences()) {
    if (include.count(s.batch)) kept.push_back(s);
  }
  return Corpus(std::move(kept), corpus.source());
}

std::vector<BatchStats> corpus_stats(const Corpus& corpus) {
  std::vector<BatchStats> rows;
  for (const auto& b : corpus.batches()) rows.push_back(BatchStats{b, 0, 0, 0.0});
  BatchStats all{"ALL", 0, 0, 0.0};
  for (const auto& s : corpus.sentences()) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const BatchStats& r) { return r.batch == s.batch; });
    ++it->n_sentences;
    it->n_ad += static_cast<size_t>(s.gold_label);
    ++all.n_sentences;
    all.n_ad += static_cast<size_t>(s.gold_label);
  }
  rows.push_back(all);
  for (auto& r : rows) {
    r.ad_fraction = r.n_sentences ? static_cast<double>(r.n_ad) / static_cast<double>(r.n_sentences) : 0.0;
  }
  return rows;
}

std::string format_stats_table(const std::vector<BatchStats>& stats) {
  std::ostringstream ss;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %11s %8s %8s\n", "Batch", "#Sentences", "AD", "%AD");
  ss << line;
  for (const auto& r : stats) {
    std::snprintf(line, sizeof(line), "%-8s %11zu %8zu %7.1f%%\n", r.batch.c_str(), r.n_sentences, r.n_ad,
                  100.0 * r.ad_fraction);
    ss << line;
  }
  return ss.str();
}

std::string format_stats_csv(const std::vector<BatchStats>& stats) {
  std::ostringstream ss;
  ss << "batch,n_sentences,n_ad,ad_fraction\n";
  for (const auto& r : stats) {
    ss << r.batch << ',' << r.n_sentences << ',' << r.n_ad << ',' << fixed(r.ad_fraction, 6) << '\n';
  }
  return ss.str();
}

std::string sentence_id(std::string_view batch, std::string_view text) {
  const std::string normalized = collapse_whitespace(nfc(text));
  std::string material;
  material.reserve(batch.size() + normalized.size() + 1);
  material.append(batch);
  material.push_back('\x1f');
  material.append(normalized);
  return "s" + sha256_hex(material).substr(0, 24);
}

int parse_label_token(std::string_view token) {
  const std::string t = to_lower(trim(token));
  if (t == "1" || t == "1.0" || t == "true" || t == "ad" || t == "yes" || t == "deliberative") return 1;
  if (t == "0" || t == "0.0" || t == "false" || t == "non-ad" || t == "non_ad" || t == "nonad" ||
      t == "nad" || t == "no" || t == "not deliberative")
    return 0;
  return -1;
}

}  // namespace delib
