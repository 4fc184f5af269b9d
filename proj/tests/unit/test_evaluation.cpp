#include <doctest.h>

#include <cmath>
#include <random>

#include "delib/errors.hpp"
#include "delib/evaluation.hpp"
#include "helpers.hpp"

using namespace delib;
using testing_support::make_sentence;

namespace {

ConfusionMatrix cm(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  ConfusionMatrix m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  return m;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("worked confusion example") {
    auto r = metrics(cm(3, 1, 1, 5));
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.recall == doctest::Approx(0.75));
    CHECK(r.f1 == doctest::Approx(0.75));
    CHECK(r.f2 == doctest::Approx(0.75));
    CHECK(r.mcc == doctest::Approx(14.0 / 24.0));
  }

  TEST_CASE("zero denominators give zero") {
    auto none = metrics(cm(0, 0, 5, 5));
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK(none.mcc == 0.0);
    auto empty = metrics(cm(0, 0, 0, 0));
    CHECK(empty.f2 == 0.0);
    CHECK(f_beta(0.0, 0.0, 2.0) == 0.0);
  }

  TEST_CASE("all-positive predictions: recall 1, precision = prevalence") {
    std::vector<Sentence> s;
    for (int i = 0; i < 45; ++i) s.push_back(make_sentence("K1", "s" + std::to_string(i), i < 13 ? 1 : 0));
    Corpus c(s);
    RunLabels all1;
    for (const auto& x : c.sentences()) all1[x.id] = 1;
    auto r = metrics(confusion(all1, c));
    CHECK(r.recall == 1.0);
    CHECK(r.precision == doctest::Approx(13.0 / 45.0));
    CHECK(r.mcc == 0.0);
  }

  TEST_CASE("F-beta identity on published result rows") {
    CHECK(f_beta(0.542, 0.800, 1.0) == doctest::Approx(0.646).epsilon(0.002));
    CHECK(f_beta(0.542, 0.800, 2.0) == doctest::Approx(0.731).epsilon(0.002));
    CHECK(f_beta(0.554, 0.808, 2.0) == doctest::Approx(0.740).epsilon(0.002));
  }

  TEST_CASE("property: metric ranges and identities on random matrices") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> d(0, 300);
    for (int i = 0; i < 1000; ++i) {
      auto r = metrics(cm(d(rng), d(rng), d(rng), d(rng)));
      CHECK(r.mcc >= -1.0);
      CHECK(r.mcc <= 1.0);
      for (double v : {r.precision, r.recall, r.f1, r.f2}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-12);
      CHECK(r.f1 >= std::min(r.precision, r.recall) - 1e-12);
    }
    for (std::size_t n = 1; n < 50; ++n) {
      auto p = metrics(cm(n, 0, 0, n + 3));
      CHECK(p.precision == 1.0);
      CHECK(p.recall == 1.0);
      CHECK(p.f1 == 1.0);
      CHECK(p.f2 == 1.0);
      CHECK(p.mcc == doctest::Approx(1.0));
      auto eq = metrics(cm(n, n + 1, n + 1, 7));
      CHECK(eq.f1 == doctest::Approx(eq.precision));
      CHECK(eq.f2 == doctest::Approx(eq.precision));
    }
  }

  TEST_CASE("confusion: schema failures excluded or counted as negative") {
    Corpus c({make_sentence("K1", "a", 1), make_sentence("K1", "b", 0), make_sentence("K2", "c", 1)});
    const auto& s = c.sentences();
    RunLabels p{{s[0].id, 1}, {s[1].id, std::nullopt}, {s[2].id, std::nullopt}};
    auto ex = confusion(p, c);
    CHECK(ex == ConfusionMatrix{1, 0, 0, 0, 2});
    auto neg = confusion(p, c, {}, ConfusionOptions{true});
    CHECK(neg == ConfusionMatrix{1, 0, 1, 1, 2});
    auto k2 = confusion(p, c, {"K2"}, ConfusionOptions{true});
    CHECK(k2 == ConfusionMatrix{0, 0, 1, 0, 1});
  }

  TEST_CASE("confusion: unknown ids and uncovered sentences are errors") {
    Corpus c({make_sentence("K1", "a", 1), make_sentence("K1", "b", 0)});
    RunLabels p{{c.sentences()[0].id, 1}};
    CHECK_THROWS_AS(confusion(p, c), DataError);
    p[c.sentences()[1].id] = 0;
    p["s-unknown"] = 1;
    CHECK_THROWS_WITH_AS(confusion(p, c), doctest::Contains("s-unknown"), DataError);
  }

  TEST_CASE("evaluate_run: per-batch scopes and pooled ALL") {
    auto c = testing_support::small_corpus(6);
    RunLabels p;
    for (const auto& s : c.sentences()) p[s.id] = s.batch == "K1" ? s.gold_label : 1;
    auto reports = evaluate_run(p, c, {"K1", "K2", "ALL"});
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].scope == "K1");
    CHECK(reports[0].f1 == 1.0);
    CHECK(reports[2].n_sentences == 12);
    CHECK(reports[2].matrix.tp == 4);
    CHECK(reports[2].matrix.fp == 4);
    auto all = evaluate_run(p, c, {"ALL"});
    CHECK(all[0].n_sentences == 24);
    CHECK_THROWS_AS(evaluate_run(p, c, {"K9"}), DataError);
  }

  TEST_CASE("comparison grid marks column maxima per group, ties included") {
    auto mk = [](double p, double r, double f1, double f2, double mcc) {
      MetricsReport m;
      m.scope = "ALL";
      m.precision = p;
      m.recall = r;
      m.f1 = f1;
      m.f2 = f2;
      m.mcc = mcc;
      return m;
    };
    std::vector<ComparisonEntry> entries{
        {"a", "Zero-Shot", {mk(0.7, 0.4, 0.5, 0.45, 0.4)}, false},
        {"b", "Zero-Shot", {mk(0.5, 0.8, 0.6, 0.7, 0.5)}, false},
        {"a", "CoT", {mk(0.5, 0.8, 0.6, 0.7, 0.4)}, false},
    };
    auto t = compare_runs(entries);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].group == "a");
    CHECK(t.rows[1].group == "a");
    CHECK(t.rows[2].group == "b");
    CHECK(t.rows[0].best[0]);
    CHECK_FALSE(t.rows[0].best[1]);
    CHECK(t.rows[1].best[1]);
    CHECK(t.rows[0].best[4]);
    CHECK(t.rows[1].best[4]);
    CHECK(t.rows[2].best == std::array<bool, 5>{true, true, true, true, true});
    CHECK(t.text().find("0.700*") != std::string::npos);
  }

  TEST_CASE("reference rows are display-only and excluded from the series") {
    auto refs = reference_baselines();
    REQUIRE(refs.size() == 3);
    for (const auto& r : refs) CHECK(r.reference);
    MetricsReport k1;
    k1.scope = "K1";
    k1.recall = 0.9;
    MetricsReport all;
    all.scope = "ALL";
    refs.push_back({"mock", "Zero-Shot", {k1, all}, false});
    auto t = compare_runs(refs);
    REQUIRE(t.series_keys.size() == 1);
    CHECK(t.series_keys[0][2] == "K1");
    CHECK(t.series_csv().find("\"mock\",\"Zero-Shot\",K1,0.000000,0.900000") != std::string::npos);
    CHECK(t.text().find("reference") != std::string::npos);
  }

  TEST_CASE("csv writers") {
    auto r = metrics(cm(3, 1, 1, 5), "K1");
    auto csv = metrics_csv({r});
    CHECK(csv.find("K1,10,0.750000,0.750000") != std::string::npos);
    CHECK(format_metrics_table({r}).find("0.583") != std::string::npos);
  }
}
