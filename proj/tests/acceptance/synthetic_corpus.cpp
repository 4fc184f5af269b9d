#include "synthetic_corpus.hpp"

#include <algorithm>
#include <array>
#include <random>

namespace acceptance {

const std::vector<BatchCount>& published_counts() {
  static const std::vector<BatchCount> counts{
      {"K1", 1262, 270}, {"K2", 992, 411}, {"K3", 1522, 400}, {"R4", 728, 210}};
  return counts;
}

namespace {

constexpr std::array kAdOpeners{"We should", "I think we could", "It may be better to", "We recommend that we",
                                "Perhaps the agency will", "I suggest we"};
constexpr std::array kFactOpeners{"The office issued", "The department published", "The committee reviewed",
                                  "Staff received", "The agency announced", "The report described"};
constexpr std::array kObjects{"the budget memo", "the draft rule", "the grant schedule", "the hearing notice",
                              "the audit summary", "the staffing plan", "the revised guidance", "the loan program"};

}  // namespace

delib::Corpus synthetic_corpus() {
  std::mt19937_64 rng(4502);
  std::vector<delib::Sentence> out;
  std::size_t serial = 0;
  std::vector<BatchCount> sizes = published_counts();
  sizes[1].sentences = kTotalSentences - sizes[0].sentences - sizes[2].sentences - sizes[3].sentences;
  for (const auto& b : sizes) {
    // AD positions spread over the batch by a seeded shuffle.
    std::vector<int> labels(b.sentences, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(b.ad), 1);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < b.sentences; ++i) {
      const int l = labels[i];
      const auto& openers = l ? kAdOpeners : kFactOpeners;
      std::string text = std::string(openers[rng() % openers.size()]) + " " + kObjects[rng() % kObjects.size()] +
                         " item " + std::to_string(++serial) + ".";
      out.push_back({delib::sentence_id(b.batch, text), b.batch, text, l});
    }
  }
  return delib::Corpus(std::move(out));
}

}  // namespace acceptance
