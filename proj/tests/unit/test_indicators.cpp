#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "delib/errors.hpp"
#include "delib/indicators.hpp"
#include "delib/util.hpp"
#include "helpers.hpp"

using namespace delib;
using testing_support::make_sentence;
using testing_support::TempDir;

namespace {

const Lexicons& lex() {
  static const Lexicons l = Lexicons::shipped();
  return l;
}

std::size_t count(std::string_view s) { return extract_indicators(s, lex()).unique_count(); }

}  // namespace

TEST_SUITE("indicators") {
  TEST_CASE("unique counts on the unambiguous example sentences") {
    CHECK(count("Give all primary civil authority to HCFA, but establish a referral process in an MOU for both "
                "chains and individual facilities.") == 0);
    CHECK(count("OMB suggested increasing the local match rate over time") == 1);
    CHECK(count("We could also reintroduce a version of education opportunity zones.") == 2);
    auto p = extract_indicators(
        "I don't know where things stand in the negotiations over this amendment, but it would be great if we "
        "could indicate that this particular provision would be a deal breaker.",
        lex());
    CHECK(p.unique_count() == 5);
    CHECK(p.present(Category::kFirstPerson));
    CHECK(p.present(Category::kCognitive));
    CHECK(p.present(Category::kModal));
    CHECK(p.present(Category::kStative));
    CHECK(p.present(Category::kReporting));
    CHECK_FALSE(p.present(Category::kFutureTemporal));
  }

  TEST_CASE("other example rows reproduced by these lexicons") {
    CHECK(count("The Welfare to Work Tax Credit, enacted in the 1997 Balanced Budget Act, provides a credit equal to "
                "35 percent of the first $10,000 in wages in the first year of employment, and 50 percent of the "
                "first $10,000 in wages in the second year, to encourage the hiring and retention of long term "
                "welfare recipients.") == 0);
    CHECK(count("Q What will the overall increase in funding be for drug testing and treatment as a result of this "
                "new initiative?") == 2);
    CHECK(count("We should be honest with President about the serious issues at stake here -- especially since 3 "
                "of his toughest cabinet members are not in agreement.") == 3);
    CHECK(count("Let us remember the difficult years chronicled in this report, and think about how good people "
                "could have done things that we know were wrong.") == 4);
    CHECK(count("However, I don't think that the policy determination can be completely divorced from an "
                "assessment of the political overlay on this issue.") == 4);
    CHECK(count("Speaker Bustamante says that we will know in the next two weeks whether there is agreement on the "
                "Cal. bilingual education legislation.") == 5);
  }

  TEST_CASE("seed words and category lists") {
    for (const char* w : {"want", "prefer", "agree", "remain", "be", "have"}) CHECK(lex().of(Category::kStative).count(w));
    for (const char* w : {"suggest", "indicate", "propose", "recommend"}) CHECK(lex().of(Category::kReporting).count(w));
    for (const char* w : {"can", "could", "may", "might", "must", "shall", "should", "will", "would"})
      CHECK(lex().of(Category::kModal).count(w));
    for (const char* w : {"believe", "know", "understand", "assume"}) CHECK(lex().of(Category::kCognitive).count(w));
    for (const char* w : {"i", "we", "me", "my", "our"}) CHECK(lex().of(Category::kFirstPerson).count(w));
    for (const char* w : {"later", "soon", "tomorrow", "eventually"}) CHECK(lex().of(Category::kFutureTemporal).count(w));
    for (const char* w : {"give", "establish", "process", "increase", "match", "rate", "time", "version", "zone",
                          "deal", "great"}) {
      for (Category c : kCategories) CHECK(lex().of(c).count(w) == 0);
    }
    CHECK(lex().digest.size() == 64);
  }

  TEST_CASE("seeds are restored and overlaps rejected when loading a directory") {
    TempDir dir;
    const std::filesystem::path src = std::filesystem::path(DELIB_DATA_DIR) / "lexicons";
    for (const auto& e : std::filesystem::directory_iterator(src)) {
      std::filesystem::copy_file(e.path(), dir / e.path().filename().string());
    }
    write_file_atomic(dir / "modal.txt", "# emptied\n");
    Lexicons l = Lexicons::load(dir.path());
    CHECK(l.of(Category::kModal).count("would"));
    write_file_atomic(dir / "cognitive.txt", "think\nwant\n");
    CHECK_THROWS_AS(Lexicons::load(dir.path()), ConfigError);
  }

  TEST_CASE("tokenizer splits contractions and folds curly apostrophes") {
    CHECK(tokenize("I don't know") == std::vector<std::string>{"i", "do", "not", "know"});
    CHECK(tokenize("We can't; they won't.") == std::vector<std::string>{"we", "can", "not", "they", "will", "not"});
    CHECK(tokenize("We\xE2\x80\x99ll see, it\xE2\x80\x99s fine") ==
          std::vector<std::string>{"we", "will", "see", "it", "is", "fine"});
    CHECK(tokenize("Let's go") == std::vector<std::string>{"let", "us", "go"});
    CHECK(tokenize("I'd say we've been") == std::vector<std::string>{"i", "would", "say", "we", "have", "been"});
    CHECK(tokenize("the agency's plan") == std::vector<std::string>{"the", "agency", "plan"});
    CHECK(tokenize("'quoted' words--here") == std::vector<std::string>{"quoted", "words", "here"});
    CHECK(tokenize("cannot") == std::vector<std::string>{"can", "not"});
  }

  TEST_CASE("lemmatizer folds inflections onto known verbs") {
    CHECK(lex().lemma("suggested") == "suggest");
    CHECK(lex().lemma("agreed") == "agree");
    CHECK(lex().lemma("proposing") == "propose");
    CHECK(lex().lemma("says") == "say");
    CHECK(lex().lemma("said") == "say");
    CHECK(lex().lemma("was") == "be");
    CHECK(lex().lemma("planned") == "plan");
    CHECK(lex().lemma("believes") == "believe");
    CHECK(lex().lemma("indicates") == "indicate");
    CHECK(lex().lemma("studies") == std::nullopt);
    CHECK(lex().lemma("facilities") == std::nullopt);
  }

  TEST_CASE("priority: each token counts once, in the first matching category") {
    auto p = extract_indicators("We will know.", lex());
    CHECK(p.hits[category_index(Category::kModal)] == std::vector<std::string>{"will"});
    CHECK(p.hits[category_index(Category::kFirstPerson)] == std::vector<std::string>{"we"});
    CHECK(p.total_count() == 3);
    auto q = extract_indicators("We suggest we suggest.", lex());
    CHECK(q.total_count() == 4);
    CHECK(q.unique_count() == 2);
  }

  TEST_CASE("property: case and surrounding punctuation never change a profile") {
    std::mt19937_64 rng(4);
    const std::vector<std::string> words{"we",     "could", "suggest", "the",  "plan", "believe", "soon",
                                         "budget", "is",    "remain",  "will", "our",  "office",  "indicated"};
    const std::vector<std::string> wraps{"\"", "'", "(", ",", ";", "--", "..."};
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::string> toks;
      for (int i = 0; i < 8; ++i) toks.push_back(words[rng() % words.size()]);
      std::string plain = join(toks, " ");
      std::string noisy;
      for (const auto& t : toks) {
        std::string u = t;
        const auto mode = rng() % 3;
        for (std::size_t k = 0; k < u.size(); ++k) {
          if (mode == 2 || (mode == 1 && k == 0)) u[k] = static_cast<char>(std::toupper(static_cast<unsigned char>(u[k])));
        }
        const std::string& w = wraps[rng() % wraps.size()];
        noisy += w + u + w + " ";
      }
      CHECK(extract_indicators(plain, lex()) == extract_indicators(noisy, lex()));
    }
  }

  TEST_CASE("property: adding a non-lexicon token leaves the profile unchanged") {
    std::mt19937_64 rng(8);
    const std::vector<std::string> base{"We", "could", "suggest", "that", "the", "office", "should", "remain",
                                        "open", "soon", "I", "believe", "it", "was", "announced"};
    const std::vector<std::string> neutral{"budget", "table", "green", "Tuesday", "quickly", "facility", "zone",
                                           "version", "rate", "1998"};
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::string> toks;
      for (int i = 0; i < 7; ++i) toks.push_back(base[rng() % base.size()]);
      const auto before = extract_indicators(join(toks, " "), lex());
      toks.insert(toks.begin() + static_cast<long>(rng() % (toks.size() + 1)), neutral[rng() % neutral.size()]);
      const auto after = extract_indicators(join(toks, " "), lex());
      CHECK(after.hits == before.hits);
    }
  }

  TEST_CASE("past tense heuristic agrees with hand labels") {
    std::istringstream in(read_file(std::filesystem::path(DELIB_FIXTURE_DIR) / "tense.tsv"));
    std::string line;
    int n = 0, agree = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      REQUIRE(tab != std::string::npos);
      const bool gold = line.substr(0, tab) == "1";
      const std::string text = line.substr(tab + 1);
      const bool got = detect_past_tense(text, lex());
      ++n;
      if (got == gold) ++agree;
      else MESSAGE("tense mismatch: ", text);
    }
    CHECK(n == 50);
    CHECK(agree >= 40);
    CHECK(detect_past_tense("OMB suggested increasing the local match rate over time", lex()));
    CHECK_FALSE(detect_past_tense("We could also reintroduce a version of education opportunity zones.", lex()));
  }

  TEST_CASE("easy sets from scripted runs") {
    std::vector<Sentence> s;
    for (int i = 0; i < 10; ++i) s.push_back(make_sentence("K1", "easy " + std::to_string(i), i < 4 ? 1 : 0));
    Corpus c(s);
    const auto& x = c.sentences();
    RunLabels r1, r2;
    for (const auto& y : x) {
      r1[y.id] = y.gold_label;
      r2[y.id] = y.gold_label;
    }
    r1[x[0].id] = 0;             // gold-1 miss in run 1
    r2[x[5].id] = 1;             // gold-0 miss in run 2
    r2[x[6].id] = std::nullopt;  // schema failure disqualifies
    auto e = build_easy_sets({r1, r2}, c);
    // easy-1: x1..x3 = 3; easy-0: x4, x7, x8, x9 = 4.
    CHECK(e.easy1.size() == 3);
    CHECK(e.easy0.size() == 4);
    CHECK(e.easy0.front() == x[4].id);
    CHECK_THROWS_AS(build_easy_sets({r1}, c), DataError);
    RunLabels partial = r1;
    partial.erase(x[9].id);
    CHECK_THROWS_AS(build_easy_sets({r1, partial}, c), DataError);
  }

  TEST_CASE("occurrence, co-occurrence and verb tables") {
    Corpus c({make_sentence("K1", "We should agree soon.", 1), make_sentence("K1", "I think we could wait.", 1),
              make_sentence("K1", "The office opened in 1998.", 0), make_sentence("K1", "The rules say nothing.", 0)});
    ProfileMap profiles = profile_corpus(c, lex());
    std::vector<std::string> ad{c.sentences()[0].id, c.sentences()[1].id};
    std::vector<std::string> nad{c.sentences()[2].id, c.sentences()[3].id};
    auto occ = occurrence_table(ad, profiles);
    CHECK(occ.n == 2);
    CHECK(occ.percent[category_index(Category::kModal)] == 100.0);
    CHECK(occ.percent[category_index(Category::kFutureTemporal)] == 50.0);
    auto occ0 = occurrence_table(nad, profiles);
    CHECK(occ0.past_percent == 50.0);
    CHECK(occ0.percent[category_index(Category::kReporting)] == 50.0);

    auto co = cooccurrence_stats(ad, profiles);
    // Profiles: {first_person, modal, stative, future} = 4 and {first_person, cognitive, modal} = 3.
    CHECK(co.median_unique == 3);
    CHECK(co.share_two_or_more == 1.0);
    CHECK(co.share_zero == 0.0);
    CHECK(co.n_first_person == 2);
    REQUIRE_FALSE(co.pairs.empty());
    CHECK(co.pairs.front().second == 2);
    auto co0 = cooccurrence_stats(nad, profiles);
    CHECK(co0.median_unique == 0);
    CHECK(co0.share_zero == 0.5);

    auto verbs = verb_frequency(ad, c, lex(), 3);
    REQUIRE(verbs.size() == 3);
    CHECK(verbs.size() <= 3);
    std::size_t total = 0;
    for (const auto& v : verbs) total += v.count;
    CHECK(total <= 2 * 5);
    CHECK_THROWS_AS(occurrence_table({}, profiles), DataError);
  }

  TEST_CASE("lower median on even-sized sets") {
    Corpus c({make_sentence("K1", "plain text", 0), make_sentence("K1", "We could", 0),
              make_sentence("K1", "We could suggest", 0), make_sentence("K1", "We could suggest soon", 0)});
    ProfileMap p = profile_corpus(c, lex());
    std::vector<std::string> ids;
    for (const auto& s : c.sentences()) ids.push_back(s.id);
    auto st = cooccurrence_stats(ids, p);
    CHECK(st.median_unique == 2);  // values 0, 2, 3, 4
  }

  TEST_CASE("analysis over two runs renders every table") {
    Corpus c({make_sentence("K1", "We should agree soon.", 1), make_sentence("K1", "I think we could wait.", 1),
              make_sentence("K1", "The office opened in 1998.", 0), make_sentence("K1", "The rules say nothing.", 0)});
    RunLabels r;
    for (const auto& s : c.sentences()) r[s.id] = s.gold_label;
    IndicatorAnalysis a = analyze_indicators({r, r}, c, lex());
    CHECK(a.easy.easy0.size() == 2);
    CHECK(a.easy.easy1.size() == 2);
    std::string text = a.text(c);
    CHECK(text.find("Most frequent verbs") != std::string::npos);
    CHECK(text.find("Indicator occurrence") != std::string::npos);
    CHECK(text.find("Indicator co-occurrence") != std::string::npos);
    CHECK(text.find("Example sentences") != std::string::npos);
    CHECK(a.occurrence_csv().find("past_tense,") != std::string::npos);
    CHECK(a.to_json()["easy1"]["n"] == 2);
  }
}
