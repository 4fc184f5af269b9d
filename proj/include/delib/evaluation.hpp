#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "delib/corpus.hpp"
#include "delib/labels.hpp"

namespace delib {

// Binary confusion counts with AD (label 1) as the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t n_schema_failures = 0;  // excluded unless counted as negatives

  std::size_t scored() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  std::string scope;  // batch code or "ALL"
  std::size_t n_sentences = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double mcc = 0.0;
  ConfusionMatrix matrix;

  nlohmann::json to_json() const;
};

struct ConfusionOptions {
  // Counts schema failures as negative predictions instead of excluding them.
  bool failures_as_negative = false;
};

// Tallies predictions over corpus sentences whose batch is in `batches`
// (empty = every batch). Throws DataError for prediction ids unknown to the
// corpus and for in-scope sentences the run never attempted.
ConfusionMatrix confusion(const RunLabels& predictions, const Corpus& corpus,
                          const std::set<std::string>& batches = {}, ConfusionOptions options = {});

// (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0.
double f_beta(double precision, double recall, double beta);
double matthews(const ConfusionMatrix& m);
MetricsReport metrics(const ConfusionMatrix& m, std::string scope = "ALL");

// One report per scope, in the order given. "ALL" pools the other listed
// batch codes, or the whole corpus when no batch code is listed.
std::vector<MetricsReport> evaluate_run(const RunLabels& predictions, const Corpus& corpus,
                                        const std::vector<std::string>& scopes, ConfusionOptions options = {});

std::string format_metrics_table(const std::vector<MetricsReport>& reports);
std::string metrics_csv(const std::vector<MetricsReport>& reports);

// A row of a comparison grid. Reference rows are display-only (never recomputed).
struct ComparisonEntry {
  std::string group;    // backend label, or the reference group
  std::string variant;  // row label
  std::vector<MetricsReport> reports;  // "ALL" first is not required
  bool reference = false;
};

struct ComparisonRow {
  std::string group;
  std::string variant;
  std::array<double, 5> values{};  // precision, recall, f1, f2, mcc on ALL
  std::array<bool, 5> best{};      // maximum of its column within the group
  bool reference = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  // Per-batch precision/recall series for every non-reference entry.
  std::vector<std::array<std::string, 3>> series_keys;  // group, variant, scope
  std::vector<std::array<double, 2>> series_values;     // precision, recall

  std::string text() const;
  std::string csv() const;
  std::string series_csv() const;
};

inline constexpr std::array<const char*, 5> kMetricColumns{"Prec", "Rec", "F1", "F2", "MCC"};

// Groups keep first-appearance order; ties for a column maximum are all marked.
ComparisonTable compare_runs(const std::vector<ComparisonEntry>& entries);

// Display-only trained-classifier baselines (10-fold CV, prior work).
std::vector<ComparisonEntry> reference_baselines();

}  // namespace delib
