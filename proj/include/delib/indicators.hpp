#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "delib/corpus.hpp"
#include "delib/labels.hpp"

namespace delib {

enum class Category { kStative, kReporting, kModal, kCognitive, kFirstPerson, kFutureTemporal };

// Display order.
inline constexpr std::array<Category, 6> kCategories{Category::kStative,   Category::kReporting,
                                                     Category::kModal,     Category::kCognitive,
                                                     Category::kFirstPerson, Category::kFutureTemporal};
// A token is credited to the first category in this order that claims it.
inline constexpr std::array<Category, 6> kMatchPriority{Category::kModal,     Category::kFirstPerson,
                                                        Category::kFutureTemporal, Category::kReporting,
                                                        Category::kCognitive, Category::kStative};

std::string_view category_name(Category c);   // "stative", "first_person", ...
std::string_view category_title(Category c);  // "Stative verbs", "First-person", ...
std::size_t category_index(Category c);

struct Lexicons {
  std::array<std::set<std::string>, 6> words;  // indexed by category_index
  std::set<std::string> verbs;                 // every lemma the lemmatizer may return
  std::unordered_map<std::string, std::string> inflections;
  std::unordered_set<std::string> past_forms;
  std::string digest;

  // Reads <category>.txt, verbs.txt and inflections.txt. Seed words are always
  // present; overlapping category lists throw ConfigError.
  static Lexicons load(const std::filesystem::path& dir);
  static Lexicons shipped();

  const std::set<std::string>& of(Category c) const { return words[category_index(c)]; }
  // Verb lemma of a lowercased token, if it resolves to a known verb.
  std::optional<std::string> lemma(std::string_view token) const;
  std::optional<Category> classify(std::string_view token) const;
};

// Lowercased word tokens with contractions split ("don't" -> "do", "not").
std::vector<std::string> tokenize(std::string_view text);

struct IndicatorProfile {
  std::array<std::vector<std::string>, 6> hits;  // matched tokens per category
  bool past_tense = false;

  bool present(Category c) const { return !hits[category_index(c)].empty(); }
  std::size_t unique_count() const;
  std::size_t total_count() const;
  // Categories present, in display order.
  std::vector<Category> categories() const;
  nlohmann::json to_json() const;
  bool operator==(const IndicatorProfile&) const = default;
};

IndicatorProfile extract_indicators(std::string_view text, const Lexicons& lex);
// The first finite verb decides: modal or present auxiliary -> false,
// irregular past or regular -ed -> true.
bool detect_past_tense(std::string_view text, const Lexicons& lex);

using ProfileMap = std::unordered_map<std::string, IndicatorProfile>;
ProfileMap profile_corpus(const Corpus& corpus, const Lexicons& lex);

struct EasySets {
  std::vector<std::string> easy0;  // gold 0, every run predicted 0
  std::vector<std::string> easy1;  // gold 1, every run predicted 1
  std::size_t n_runs = 0;
};

// Sentences every run labels correctly. Needs at least two runs covering the
// corpus; a schema failure in any run disqualifies the sentence.
EasySets build_easy_sets(const std::vector<RunLabels>& runs, const Corpus& corpus);

struct OccurrenceRow {
  std::size_t n = 0;
  std::array<std::size_t, 6> counts{};
  std::array<double, 6> percent{};
  std::size_t past_count = 0;
  double past_percent = 0.0;
};

OccurrenceRow occurrence_table(const std::vector<std::string>& ids, const ProfileMap& profiles);

struct CooccurrenceStats {
  std::size_t n = 0;
  std::size_t median_unique = 0;  // lower median
  std::size_t median_total = 0;
  double share_two_or_more = 0.0;
  double share_zero = 0.0;
  std::vector<std::pair<std::pair<Category, Category>, std::size_t>> pairs;  // count desc
  // Among sentences with a first-person hit: how often each other category appears too.
  std::vector<std::pair<Category, std::size_t>> with_first_person;
  std::size_t n_first_person = 0;
};

CooccurrenceStats cooccurrence_stats(const std::vector<std::string>& ids, const ProfileMap& profiles);

struct VerbShare {
  std::string lemma;
  std::size_t count = 0;  // sentences containing the lemma at least once
  double percent = 0.0;
};

std::vector<VerbShare> verb_frequency(const std::vector<std::string>& ids, const Corpus& corpus,
                                      const Lexicons& lex, std::size_t top_k = 10);

struct IndicatorAnalysis {
  EasySets easy;
  std::array<OccurrenceRow, 2> occurrence;
  std::array<CooccurrenceStats, 2> cooccurrence;
  std::array<std::vector<VerbShare>, 2> verbs;
  // (unique count, label) -> first easy sentence in corpus order.
  std::map<std::pair<std::size_t, int>, std::string> examples;
  std::string lexicon_digest;

  std::string text(const Corpus& corpus) const;
  std::string occurrence_csv() const;
  std::string verbs_csv() const;
  nlohmann::json to_json() const;
};

IndicatorAnalysis analyze_indicators(const std::vector<RunLabels>& runs, const Corpus& corpus, const Lexicons& lex,
                                     std::size_t top_k = 10);

}  // namespace delib
