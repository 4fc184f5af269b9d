#include "delib/indicators.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "delib/errors.hpp"
#include "delib/util.hpp"

namespace delib {
namespace {

using json = nlohmann::json;

constexpr std::array<const char*, 6> kNames{"stative", "reporting", "modal", "cognitive", "first_person",
                                            "future_temporal"};
constexpr std::array<const char*, 6> kTitles{"Stative verbs", "Reporting verbs", "Modal verbs", "Cognitive verbs",
                                             "First-person", "Future temporal"};

const std::array<std::vector<std::string>, 6> kSeeds{{
    {"want", "prefer", "agree", "remain", "be", "have"},
    {"suggest", "indicate", "propose", "recommend", "say", "discuss"},
    {"can", "could", "may", "might", "must", "shall", "should", "will", "would"},
    {"believe", "know", "understand", "assume", "think"},
    {"i", "we", "me", "my", "our", "us"},
    {"later", "soon", "tomorrow", "eventually"},
}};

const std::unordered_set<std::string> kPresentFinite{"am", "is", "are", "has", "have", "do", "does", "says"};
// Words ending in -ed that are not past forms.
const std::unordered_set<std::string> kEdExceptions{"need",  "feed",   "speed", "seed",  "indeed", "embed",
                                                    "hundred", "red",  "bed",   "shed",  "breed",  "creed",
                                                    "greed", "proceed", "succeed", "exceed", "weed", "deed",
                                                    "naked", "sacred", "wicked", "kindred", "shred", "wed"};
const std::unordered_set<std::string> kDeterminers{"the", "a",   "an",   "these", "those", "its",  "their", "our",
                                                   "his", "her", "my",   "your",  "every", "each", "all",   "some",
                                                   "any", "no",  "many", "several", "both", "few"};

std::set<std::string> read_word_list(const std::filesystem::path& path) {
  std::set<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string w = to_lower(trim(line));
    if (!w.empty()) out.insert(w);
  }
  return out;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_doubled_consonant(std::string_view s) {
  if (s.size() < 2) return false;
  char a = s[s.size() - 1];
  char b = s[s.size() - 2];
  return a == b && std::string_view("aeiouy").find(a) == std::string_view::npos;
}

void push_expanded(std::string word, std::vector<std::string>& out) {
  auto apos = word.find('\'');
  if (apos == std::string::npos) {
    if (word == "cannot") {
      out.push_back("can");
      out.push_back("not");
    } else {
      out.push_back(std::move(word));
    }
    return;
  }
  auto ends = [&](std::string_view suf) {
    return word.size() > suf.size() && word.compare(word.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("n't")) {
    std::string base = word.substr(0, word.size() - 3);
    if (base == "ca") base = "can";
    else if (base == "wo") base = "will";
    else if (base == "sha") base = "shall";
    else if (base == "ai") base = "is";
    out.push_back(base);
    out.push_back("not");
    return;
  }
  static const std::vector<std::pair<std::string, std::string>> kClitics{
      {"'ll", "will"}, {"'d", "would"}, {"'ve", "have"}, {"'re", "are"}, {"'m", "am"}};
  for (const auto& [suf, full] : kClitics) {
    if (ends(suf)) {
      out.push_back(word.substr(0, word.size() - suf.size()));
      out.push_back(full);
      return;
    }
  }
  if (ends("'s")) {
    std::string base = word.substr(0, word.size() - 2);
    static const std::unordered_set<std::string> kCopula{"it",   "that", "he",   "she", "there", "here",
                                                         "what", "who",  "where", "how", "when",  "everyone"};
    if (base == "let") {
      out.push_back("let");
      out.push_back("us");
    } else {
      out.push_back(base);
      if (kCopula.count(base)) out.push_back("is");
    }
    return;
  }
  // Other internal apostrophes (o'clock, names): drop them.
  word.erase(std::remove(word.begin(), word.end(), '\''), word.end());
  out.push_back(std::move(word));
}

}  // namespace

std::string_view category_name(Category c) { return kNames[category_index(c)]; }
std::string_view category_title(Category c) { return kTitles[category_index(c)]; }
std::size_t category_index(Category c) { return static_cast<std::size_t>(c); }

Lexicons Lexicons::load(const std::filesystem::path& dir) {
  Lexicons lex;
  std::string digest_input;
  for (std::size_t i = 0; i < kCategories.size(); ++i) {
    auto path = dir / (std::string(kNames[i]) + ".txt");
    lex.words[i] = read_word_list(path);
    for (const auto& seed : kSeeds[i]) lex.words[i].insert(seed);
    digest_input += kNames[i];
    digest_input += '\n';
    for (const auto& w : lex.words[i]) digest_input += w + '\n';
  }
  for (std::size_t i = 0; i < kCategories.size(); ++i) {
    for (std::size_t j = i + 1; j < kCategories.size(); ++j) {
      for (const auto& w : lex.words[i]) {
        if (lex.words[j].count(w)) {
          throw ConfigError("lexicon word '" + w + "' appears in both " + kNames[i] + " and " + kNames[j]);
        }
      }
    }
  }
  lex.verbs = read_word_list(dir / "verbs.txt");
  for (Category c : {Category::kStative, Category::kReporting, Category::kCognitive}) {
    lex.verbs.insert(lex.of(c).begin(), lex.of(c).end());
  }
  std::string inflections = read_file(dir / "inflections.txt");
  std::istringstream in(inflections);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string surface, lemma, tag;
    if (!(fields >> surface)) continue;
    if (!(fields >> lemma)) {
      throw ConfigError("inflections.txt:" + std::to_string(line_no) + ": expected 'surface lemma [past]'");
    }
    surface = to_lower(surface);
    lemma = to_lower(lemma);
    lex.inflections[surface] = lemma;
    lex.verbs.insert(lemma);
    if (fields >> tag) {
      if (tag != "past") throw ConfigError("inflections.txt:" + std::to_string(line_no) + ": unknown tag " + tag);
      lex.past_forms.insert(surface);
    }
  }
  digest_input += "verbs\n";
  for (const auto& v : lex.verbs) digest_input += v + '\n';
  digest_input += "inflections\n" + inflections;
  lex.digest = sha256_hex(digest_input);
  return lex;
}

Lexicons Lexicons::shipped() { return load(std::filesystem::path(DELIB_DATA_DIR) / "lexicons"); }

std::optional<std::string> Lexicons::lemma(std::string_view token) const {
  std::string t(token);
  if (auto it = inflections.find(t); it != inflections.end()) return it->second;
  if (verbs.count(t)) return t;
  auto ends = [&](std::string_view suf) {
    return t.size() > suf.size() + 1 && t.compare(t.size() - suf.size(), suf.size(), suf) == 0;
  };
  std::vector<std::string> candidates;
  if (ends("ies")) candidates.push_back(t.substr(0, t.size() - 3) + "y");
  if (ends("es")) candidates.push_back(t.substr(0, t.size() - 2));
  if (ends("s") && !ends("ss")) candidates.push_back(t.substr(0, t.size() - 1));
  if (ends("ied")) candidates.push_back(t.substr(0, t.size() - 3) + "y");
  if (ends("ed")) {
    std::string stem = t.substr(0, t.size() - 2);
    candidates.push_back(stem);
    candidates.push_back(stem + "e");
    if (is_doubled_consonant(stem)) candidates.push_back(stem.substr(0, stem.size() - 1));
  }
  if (ends("ing")) {
    std::string stem = t.substr(0, t.size() - 3);
    candidates.push_back(stem);
    candidates.push_back(stem + "e");
    if (is_doubled_consonant(stem)) candidates.push_back(stem.substr(0, stem.size() - 1));
  }
  for (const auto& c : candidates) {
    if (verbs.count(c)) return c;
  }
  return std::nullopt;
}

std::optional<Category> Lexicons::classify(std::string_view token) const {
  std::optional<std::string> lem;
  bool lemma_done = false;
  for (Category c : kMatchPriority) {
    const auto& list = of(c);
    if (c == Category::kModal || c == Category::kFirstPerson || c == Category::kFutureTemporal) {
      if (list.count(std::string(token))) return c;
      continue;
    }
    if (!lemma_done) {
      lem = lemma(token);
      lemma_done = true;
    }
    if (lem && list.count(*lem)) return c;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  // Fold curly apostrophes (U+2018, U+2019) to ASCII.
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x98 || static_cast<unsigned char>(text[i + 2]) == 0x99)) {
      s += '\'';
      i += 2;
    } else {
      s += text[i];
    }
  }
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    while (!word.empty() && word.back() == '\'') word.pop_back();
    if (!word.empty()) push_expanded(to_lower(word), out);
    word.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (is_word_byte(c)) {
      word += static_cast<char>(c);
    } else if (c == '\'' && !word.empty() && i + 1 < s.size() &&
               is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
      word += '\'';
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::size_t IndicatorProfile::unique_count() const {
  return static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(), [](const auto& h) { return !h.empty(); }));
}

std::size_t IndicatorProfile::total_count() const {
  std::size_t n = 0;
  for (const auto& h : hits) n += h.size();
  return n;
}

std::vector<Category> IndicatorProfile::categories() const {
  std::vector<Category> out;
  for (Category c : kCategories) {
    if (present(c)) out.push_back(c);
  }
  return out;
}

json IndicatorProfile::to_json() const {
  json j = json::object();
  for (Category c : kCategories) j[std::string(category_name(c))] = hits[category_index(c)];
  j["past_tense"] = past_tense;
  j["unique_count"] = unique_count();
  return j;
}

IndicatorProfile extract_indicators(std::string_view text, const Lexicons& lex) {
  IndicatorProfile p;
  for (const auto& tok : tokenize(text)) {
    if (auto c = lex.classify(tok)) p.hits[category_index(*c)].push_back(tok);
  }
  p.past_tense = detect_past_tense(text, lex);
  return p;
}

bool detect_past_tense(std::string_view text, const Lexicons& lex) {
  auto tokens = tokenize(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (lex.of(Category::kModal).count(t) || kPresentFinite.count(t)) return false;
    if (lex.past_forms.count(t)) return true;
    if (t.size() >= 4 && t.compare(t.size() - 2, 2, "ed") == 0 && !kEdExceptions.count(t)) return true;
    // Third-person present ("the agency requires"), unless a determiner marks a plural noun.
    if (i > 0 && !kDeterminers.count(tokens[i - 1]) && t.size() > 3 && t.back() == 's' &&
        t[t.size() - 2] != 's') {
      if (auto lem = lex.lemma(t); lem && *lem != t) return false;
    }
  }
  return false;
}

ProfileMap profile_corpus(const Corpus& corpus, const Lexicons& lex) {
  ProfileMap out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) out.emplace(s.id, extract_indicators(s.text, lex));
  return out;
}

EasySets build_easy_sets(const std::vector<RunLabels>& runs, const Corpus& corpus) {
  if (runs.size() < 2) throw DataError("easy sets need at least two runs, got " + std::to_string(runs.size()));
  EasySets out;
  out.n_runs = runs.size();
  for (const auto& s : corpus.sentences()) {
    bool all_correct = true;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      auto it = runs[r].find(s.id);
      if (it == runs[r].end()) {
        throw DataError("run " + std::to_string(r + 1) + " does not cover sentence " + s.id);
      }
      if (!it->second || *it->second != s.gold_label) all_correct = false;
    }
    if (!all_correct) continue;
    (s.gold_label == 1 ? out.easy1 : out.easy0).push_back(s.id);
  }
  return out;
}

namespace {

const IndicatorProfile& profile_of(const ProfileMap& profiles, const std::string& id) {
  auto it = profiles.find(id);
  if (it == profiles.end()) throw DataError("no indicator profile for sentence " + id);
  return it->second;
}

double pct(std::size_t k, std::size_t n) { return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / n; }

}  // namespace

OccurrenceRow occurrence_table(const std::vector<std::string>& ids, const ProfileMap& profiles) {
  if (ids.empty()) throw DataError("occurrence table over an empty sentence set");
  OccurrenceRow row;
  row.n = ids.size();
  for (const auto& id : ids) {
    const auto& p = profile_of(profiles, id);
    for (Category c : kCategories) {
      if (p.present(c)) ++row.counts[category_index(c)];
    }
    if (p.past_tense) ++row.past_count;
  }
  for (std::size_t i = 0; i < row.counts.size(); ++i) row.percent[i] = pct(row.counts[i], row.n);
  row.past_percent = pct(row.past_count, row.n);
  return row;
}

CooccurrenceStats cooccurrence_stats(const std::vector<std::string>& ids, const ProfileMap& profiles) {
  if (ids.empty()) throw DataError("co-occurrence statistics over an empty sentence set");
  CooccurrenceStats st;
  st.n = ids.size();
  std::vector<std::size_t> uniques, totals;
  std::map<std::pair<Category, Category>, std::size_t> pairs;
  std::array<std::size_t, 6> with_fp{};
  std::size_t ge2 = 0, zero = 0;
  for (const auto& id : ids) {
    const auto& p = profile_of(profiles, id);
    uniques.push_back(p.unique_count());
    totals.push_back(p.total_count());
    if (p.unique_count() >= 2) ++ge2;
    if (p.unique_count() == 0) ++zero;
    auto cats = p.categories();
    for (std::size_t a = 0; a < cats.size(); ++a) {
      for (std::size_t b = a + 1; b < cats.size(); ++b) ++pairs[{cats[a], cats[b]}];
    }
    if (p.present(Category::kFirstPerson)) {
      ++st.n_first_person;
      for (Category c : cats) {
        if (c != Category::kFirstPerson) ++with_fp[category_index(c)];
      }
    }
  }
  auto lower_median = [](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
  };
  st.median_unique = lower_median(uniques);
  st.median_total = lower_median(totals);
  st.share_two_or_more = static_cast<double>(ge2) / st.n;
  st.share_zero = static_cast<double>(zero) / st.n;
  st.pairs.assign(pairs.begin(), pairs.end());
  std::stable_sort(st.pairs.begin(), st.pairs.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (Category c : kCategories) {
    if (c == Category::kFirstPerson) continue;
    st.with_first_person.emplace_back(c, with_fp[category_index(c)]);
  }
  std::stable_sort(st.with_first_person.begin(), st.with_first_person.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return st;
}

std::vector<VerbShare> verb_frequency(const std::vector<std::string>& ids, const Corpus& corpus, const Lexicons& lex,
                                      std::size_t top_k) {
  if (ids.empty()) throw DataError("verb frequency over an empty sentence set");
  std::map<std::string, std::size_t> counts;
  for (const auto& id : ids) {
    const Sentence* s = corpus.find(id);
    if (!s) throw DataError("unknown sentence id " + id);
    std::set<std::string> seen;
    for (const auto& tok : tokenize(s->text)) {
      if (lex.of(Category::kModal).count(tok)) {
        seen.insert(tok);
      } else if (auto lem = lex.lemma(tok)) {
        seen.insert(*lem);
      }
    }
    for (const auto& v : seen) ++counts[v];
  }
  std::vector<VerbShare> out;
  for (const auto& [lemma, n] : counts) out.push_back({lemma, n, pct(n, ids.size())});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

IndicatorAnalysis analyze_indicators(const std::vector<RunLabels>& runs, const Corpus& corpus, const Lexicons& lex,
                                     std::size_t top_k) {
  IndicatorAnalysis a;
  a.lexicon_digest = lex.digest;
  a.easy = build_easy_sets(runs, corpus);
  if (a.easy.easy0.empty() || a.easy.easy1.empty()) {
    throw DataError("easy set is empty (easy-0: " + std::to_string(a.easy.easy0.size()) +
                    ", easy-1: " + std::to_string(a.easy.easy1.size()) + ")");
  }
  ProfileMap profiles;
  for (const auto* set : {&a.easy.easy0, &a.easy.easy1}) {
    for (const auto& id : *set) profiles.emplace(id, extract_indicators(corpus.find(id)->text, lex));
  }
  const std::array<const std::vector<std::string>*, 2> sets{&a.easy.easy0, &a.easy.easy1};
  for (int label = 0; label < 2; ++label) {
    a.occurrence[label] = occurrence_table(*sets[label], profiles);
    a.cooccurrence[label] = cooccurrence_stats(*sets[label], profiles);
    a.verbs[label] = verb_frequency(*sets[label], corpus, lex, top_k);
    for (const auto& id : *sets[label]) a.examples.emplace(std::make_pair(profiles[id].unique_count(), label), id);
  }
  return a;
}

std::string IndicatorAnalysis::text(const Corpus& corpus) const {
  std::ostringstream ss;
  char line[256];
  ss << "Easy sets over " << easy.n_runs << " runs: easy-0 n=" << easy.easy0.size()
     << ", easy-1 n=" << easy.easy1.size() << "\n\n";

  ss << "Most frequent verbs (% of sentences)\n";
  std::snprintf(line, sizeof(line), "%-4s %-14s %7s   %-14s %7s\n", "#", "easy-0", "%", "easy-1", "%");
  ss << line;
  std::size_t rows = std::max(verbs[0].size(), verbs[1].size());
  for (std::size_t i = 0; i < rows; ++i) {
    auto cell = [&](int l, std::size_t k, bool lemma) -> std::string {
      if (k >= verbs[l].size()) return "";
      return lemma ? verbs[l][k].lemma : fixed(verbs[l][k].percent, 1);
    };
    std::snprintf(line, sizeof(line), "%-4zu %-14s %7s   %-14s %7s\n", i + 1, cell(0, i, true).c_str(),
                  cell(0, i, false).c_str(), cell(1, i, true).c_str(), cell(1, i, false).c_str());
    ss << line;
  }

  ss << "\nIndicator occurrence (% of sentences with at least one match)\n";
  std::snprintf(line, sizeof(line), "%-18s %9s %9s\n", "Indicator", "easy-0", "easy-1");
  ss << line;
  for (Category c : kCategories) {
    std::size_t i = category_index(c);
    std::snprintf(line, sizeof(line), "%-18s %9.1f %9.1f\n", std::string(category_title(c)).c_str(),
                  occurrence[0].percent[i], occurrence[1].percent[i]);
    ss << line;
  }
  std::snprintf(line, sizeof(line), "%-18s %9.1f %9.1f\n", "Past tense", occurrence[0].past_percent,
                occurrence[1].past_percent);
  ss << line;

  ss << "\nIndicator co-occurrence\n";
  std::snprintf(line, sizeof(line), "%-30s %9s %9s\n", "Statistic", "easy-0", "easy-1");
  ss << line;
  std::snprintf(line, sizeof(line), "%-30s %9zu %9zu\n", "Median unique indicators", cooccurrence[0].median_unique,
                cooccurrence[1].median_unique);
  ss << line;
  std::snprintf(line, sizeof(line), "%-30s %9zu %9zu\n", "Median total indicators", cooccurrence[0].median_total,
                cooccurrence[1].median_total);
  ss << line;
  std::snprintf(line, sizeof(line), "%-30s %9.1f %9.1f\n", "% with 2+ indicators",
                100.0 * cooccurrence[0].share_two_or_more, 100.0 * cooccurrence[1].share_two_or_more);
  ss << line;
  std::snprintf(line, sizeof(line), "%-30s %9.1f %9.1f\n", "% with no indicator", 100.0 * cooccurrence[0].share_zero,
                100.0 * cooccurrence[1].share_zero);
  ss << line;
  for (int l = 0; l < 2; ++l) {
    ss << "Top pairs (easy-" << l << "):";
    for (std::size_t k = 0; k < std::min<std::size_t>(3, cooccurrence[l].pairs.size()); ++k) {
      const auto& [pair, n] = cooccurrence[l].pairs[k];
      ss << ' ' << category_name(pair.first) << '+' << category_name(pair.second) << '=' << n;
    }
    ss << '\n';
  }

  ss << "\nExample sentences by number of unique indicators\n";
  for (const auto& [key, id] : examples) {
    const Sentence* s = corpus.find(id);
    ss << key.first << "  " << key.second << "  " << (s ? s->text : id) << '\n';
  }
  ss << "\nLexicon digest: " << lexicon_digest << '\n';
  return ss.str();
}

std::string IndicatorAnalysis::occurrence_csv() const {
  std::ostringstream ss;
  ss << "indicator,easy0_percent,easy1_percent,easy0_count,easy1_count\n";
  for (Category c : kCategories) {
    std::size_t i = category_index(c);
    ss << category_name(c) << ',' << fixed(occurrence[0].percent[i], 3) << ',' << fixed(occurrence[1].percent[i], 3)
       << ',' << occurrence[0].counts[i] << ',' << occurrence[1].counts[i] << '\n';
  }
  ss << "past_tense," << fixed(occurrence[0].past_percent, 3) << ',' << fixed(occurrence[1].past_percent, 3) << ','
     << occurrence[0].past_count << ',' << occurrence[1].past_count << '\n';
  return ss.str();
}

std::string IndicatorAnalysis::verbs_csv() const {
  std::ostringstream ss;
  ss << "set,rank,lemma,count,percent\n";
  for (int l = 0; l < 2; ++l) {
    for (std::size_t k = 0; k < verbs[l].size(); ++k) {
      ss << "easy" << l << ',' << k + 1 << ',' << verbs[l][k].lemma << ',' << verbs[l][k].count << ','
         << fixed(verbs[l][k].percent, 3) << '\n';
    }
  }
  return ss.str();
}

json IndicatorAnalysis::to_json() const {
  json j;
  j["n_runs"] = easy.n_runs;
  j["lexicon_digest"] = lexicon_digest;
  for (int l = 0; l < 2; ++l) {
    json side;
    side["n"] = occurrence[l].n;
    json occ = json::object();
    for (Category c : kCategories) occ[std::string(category_name(c))] = occurrence[l].percent[category_index(c)];
    occ["past_tense"] = occurrence[l].past_percent;
    side["occurrence_percent"] = occ;
    const auto& co = cooccurrence[l];
    side["median_unique"] = co.median_unique;
    side["median_total"] = co.median_total;
    side["share_two_or_more"] = co.share_two_or_more;
    side["share_zero"] = co.share_zero;
    json pairs = json::array();
    for (const auto& [pair, n] : co.pairs) {
      pairs.push_back({{"a", category_name(pair.first)}, {"b", category_name(pair.second)}, {"count", n}});
    }
    side["pairs"] = pairs;
    json fp = json::object();
    for (const auto& [c, n] : co.with_first_person) fp[std::string(category_name(c))] = n;
    side["with_first_person"] = fp;
    side["n_first_person"] = co.n_first_person;
    json verbs_j = json::array();
    for (const auto& v : verbs[l]) verbs_j.push_back({{"lemma", v.lemma}, {"count", v.count}, {"percent", v.percent}});
    side["verbs"] = verbs_j;
    side["ids"] = l == 0 ? easy.easy0 : easy.easy1;
    j[l == 0 ? "easy0" : "easy1"] = side;
  }
  json ex = json::array();
  for (const auto& [key, id] : examples) ex.push_back({{"unique_count", key.first}, {"label", key.second}, {"id", id}});
  j["examples"] = ex;
  return j;
}

}  // namespace delib
