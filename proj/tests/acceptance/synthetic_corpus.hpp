#pragma once

#include <string>
#include <vector>

#include "delib/corpus.hpp"

namespace acceptance {

struct BatchCount {
  std::string batch;
  std::size_t sentences;
  std::size_t ad;
};

// Per-batch sizes of the annotated corpus as published. They sum to 4,504
// sentences while the published total is 4,502.
const std::vector<BatchCount>& published_counts();

// Published totals: 4,502 sentences, 1,291 AD.
inline constexpr std::size_t kTotalSentences = 4502;
inline constexpr std::size_t kTotalAd = 1291;

// Deterministic stand-in matching the published totals and AD counts; K2
// holds 990 sentences so the batches add up to the total. Used where only
// the shape of the corpus matters.
delib::Corpus synthetic_corpus();

}  // namespace acceptance
