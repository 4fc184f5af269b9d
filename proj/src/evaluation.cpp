#include "delib/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

const MetricsReport* find_scope(const std::vector<MetricsReport>& reports, std::string_view scope) {
  for (const auto& r : reports) {
    if (r.scope == scope) return &r;
  }
  return nullptr;
}

}  // namespace

json MetricsReport::to_json() const {
  return json{{"scope", scope},
              {"n_sentences", n_sentences},
              {"precision", precision},
              {"recall", recall},
              {"f1", f1},
              {"f2", f2},
              {"mcc", mcc},
              {"tp", matrix.tp},
              {"fp", matrix.fp},
              {"fn", matrix.fn},
              {"tn", matrix.tn},
              {"schema_failures", matrix.n_schema_failures}};
}

ConfusionMatrix confusion(const RunLabels& predictions, const Corpus& corpus, const std::set<std::string>& batches,
                          ConfusionOptions options) {
  for (const auto& [id, label] : predictions) {
    if (!corpus.find(id)) throw DataError("prediction for unknown sentence id " + id);
  }
  ConfusionMatrix m;
  for (const auto& s : corpus.sentences()) {
    if (!batches.empty() && !batches.count(s.batch)) continue;
    auto it = predictions.find(s.id);
    if (it == predictions.end()) throw DataError("run has no prediction for sentence " + s.id);
    std::optional<int> pred = it->second;
    if (!pred) {
      ++m.n_schema_failures;
      if (!options.failures_as_negative) continue;
      pred = 0;
    }
    if (*pred == 1) {
      if (s.gold_label == 1) ++m.tp;
      else ++m.fp;
    } else {
      if (s.gold_label == 1) ++m.fn;
      else ++m.tn;
    }
  }
  return m;
}

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

double matthews(const ConfusionMatrix& m) {
  const double tp = static_cast<double>(m.tp);
  const double fp = static_cast<double>(m.fp);
  const double fn = static_cast<double>(m.fn);
  const double tn = static_cast<double>(m.tn);
  const double a = tp + fp;
  const double b = tp + fn;
  const double c = tn + fp;
  const double d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  const double v = (tp * tn - fp * fn) / (std::sqrt(a) * std::sqrt(b) * std::sqrt(c) * std::sqrt(d));
  return std::clamp(v, -1.0, 1.0);
}

MetricsReport metrics(const ConfusionMatrix& m, std::string scope) {
  MetricsReport r;
  r.scope = std::move(scope);
  r.matrix = m;
  r.n_sentences = m.scored();
  r.precision = ratio(m.tp, m.tp + m.fp);
  r.recall = ratio(m.tp, m.tp + m.fn);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.f2 = f_beta(r.precision, r.recall, 2.0);
  r.mcc = matthews(m);
  return r;
}

std::vector<MetricsReport> evaluate_run(const RunLabels& predictions, const Corpus& corpus,
                                        const std::vector<std::string>& scopes, ConfusionOptions options) {
  std::set<std::string> listed;
  for (const auto& s : scopes) {
    if (s != "ALL") listed.insert(s);
  }
  std::vector<MetricsReport> out;
  for (const auto& scope : scopes) {
    std::set<std::string> batches = scope == "ALL" ? listed : std::set<std::string>{scope};
    std::size_t n = 0;
    for (const auto& s : corpus.sentences()) {
      if (batches.empty() || batches.count(s.batch)) ++n;
    }
    if (n == 0) throw DataError("scope " + scope + " has no sentences");
    MetricsReport r = metrics(confusion(predictions, corpus, batches, options), scope);
    r.n_sentences = n;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_metrics_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream ss;
  char line[200];
  std::snprintf(line, sizeof(line), "%-6s %6s %7s %7s %7s %7s %7s %6s %6s %6s %6s %6s\n", "Scope", "N", "Prec", "Rec",
                "F1", "F2", "MCC", "TP", "FP", "FN", "TN", "Fail");
  ss << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-6s %6zu %7.3f %7.3f %7.3f %7.3f %7.3f %6zu %6zu %6zu %6zu %6zu\n",
                  r.scope.c_str(), r.n_sentences, r.precision, r.recall, r.f1, r.f2, r.mcc, r.matrix.tp, r.matrix.fp,
                  r.matrix.fn, r.matrix.tn, r.matrix.n_schema_failures);
    ss << line;
  }
  return ss.str();
}

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream ss;
  ss << "scope,n_sentences,precision,recall,f1,f2,mcc,tp,fp,fn,tn,schema_failures\n";
  for (const auto& r : reports) {
    ss << r.scope << ',' << r.n_sentences << ',' << fixed(r.precision, 6) << ',' << fixed(r.recall, 6) << ','
       << fixed(r.f1, 6) << ',' << fixed(r.f2, 6) << ',' << fixed(r.mcc, 6) << ',' << r.matrix.tp << ','
       << r.matrix.fp << ',' << r.matrix.fn << ',' << r.matrix.tn << ',' << r.matrix.n_schema_failures << '\n';
  }
  return ss.str();
}

ComparisonTable compare_runs(const std::vector<ComparisonEntry>& entries) {
  ComparisonTable table;
  for (const auto& e : entries) {
    const MetricsReport* all = find_scope(e.reports, "ALL");
    if (!all && !e.reports.empty()) all = &e.reports.front();
    ComparisonRow row;
    row.group = e.group;
    row.variant = e.variant;
    row.reference = e.reference;
    if (all) row.values = {all->precision, all->recall, all->f1, all->f2, all->mcc};
    table.rows.push_back(row);
    if (e.reference) continue;
    for (const auto& r : e.reports) {
      if (r.scope == "ALL") continue;
      table.series_keys.push_back({e.group, e.variant, r.scope});
      table.series_values.push_back({r.precision, r.recall});
    }
  }
  // Stable grouping by first appearance.
  std::vector<std::string> groups;
  for (const auto& r : table.rows) {
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
  }
  std::vector<ComparisonRow> ordered;
  for (const auto& g : groups) {
    for (const auto& r : table.rows) {
      if (r.group == g) ordered.push_back(r);
    }
  }
  table.rows = std::move(ordered);
  for (const auto& g : groups) {
    for (size_t c = 0; c < kMetricColumns.size(); ++c) {
      double best = -2.0;
      for (const auto& r : table.rows) {
        if (r.group == g) best = std::max(best, r.values[c]);
      }
      for (auto& r : table.rows) {
        if (r.group == g && r.values[c] == best) r.best[c] = true;
      }
    }
  }
  return table;
}

std::string ComparisonTable::text() const {
  std::ostringstream ss;
  char line[200];
  std::snprintf(line, sizeof(line), "%-44s %8s %8s %8s %8s %8s\n", "Variant", kMetricColumns[0], kMetricColumns[1],
                kMetricColumns[2], kMetricColumns[3], kMetricColumns[4]);
  ss << line;
  std::string current;
  bool first = true;
  for (const auto& r : rows) {
    if (first || r.group != current) {
      ss << "-- " << r.group << (r.reference ? " (reference, not recomputed)" : "") << " --\n";
      current = r.group;
      first = false;
    }
    std::snprintf(line, sizeof(line), "%-44s", r.variant.c_str());
    ss << line;
    for (size_t c = 0; c < r.values.size(); ++c) {
      std::snprintf(line, sizeof(line), " %7.3f%c", r.values[c], r.best[c] ? '*' : ' ');
      ss << line;
    }
    ss << '\n';
  }
  ss << "* best in group\n";
  return ss.str();
}

std::string ComparisonTable::csv() const {
  std::ostringstream ss;
  ss << "group,variant,reference,precision,recall,f1,f2,mcc,best\n";
  for (const auto& r : rows) {
    std::vector<std::string> best;
    for (size_t c = 0; c < r.best.size(); ++c) {
      if (r.best[c]) best.push_back(to_lower(kMetricColumns[c]));
    }
    ss << '"' << r.group << "\",\"" << r.variant << "\"," << (r.reference ? 1 : 0);
    for (double v : r.values) ss << ',' << fixed(v, 6);
    ss << ',' << join(best, ";") << '\n';
  }
  return ss.str();
}

std::string ComparisonTable::series_csv() const {
  std::ostringstream ss;
  ss << "group,variant,scope,precision,recall\n";
  for (size_t i = 0; i < series_keys.size(); ++i) {
    ss << '"' << series_keys[i][0] << "\",\"" << series_keys[i][1] << "\"," << series_keys[i][2] << ','
       << fixed(series_values[i][0], 6) << ',' << fixed(series_values[i][1], 6) << '\n';
  }
  return ss.str();
}

std::vector<ComparisonEntry> reference_baselines() {
  struct Published {
    const char* name;
    double p, r, f1, f2, mcc;
  };
  static constexpr Published kRows[] = {
      {"LR (10-fold CV)", 0.620, 0.720, 0.666, 0.697, 0.490},
      {"SVM (10-fold CV)", 0.680, 0.590, 0.632, 0.606, 0.480},
      {"BERT (10-fold CV)", 0.730, 0.710, 0.720, 0.714, 0.590},
  };
  std::vector<ComparisonEntry> out;
  for (const auto& row : kRows) {
    MetricsReport r;
    r.scope = "ALL";
    r.precision = row.p;
    r.recall = row.r;
    r.f1 = row.f1;
    r.f2 = row.f2;
    r.mcc = row.mcc;
    out.push_back(ComparisonEntry{"Trained classifiers (prior work)", row.name, {r}, true});
  }
  return out;
}

}  // namespace delib
