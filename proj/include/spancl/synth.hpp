#pragma once

#include <cstdint>

#include "spancl/augment.hpp"
#include "spancl/corpus.hpp"

namespace spancl {

struct SynthConfig {
  std::size_t train_passages = 500;
  std::size_t dev_passages = 200;
  int sentences_per_passage = 3;
  std::uint64_t seed = 1;
};

/// Templated toy corpus. Each passage is a few "The <group> <verb> a <adj>
/// <object> in <year>." sentences with one question about one of them.
/// Every training question is answerable; half of the dev questions are
/// distorted into unanswerable ones by the same rules the augmenter uses.
struct SynthCorpus {
  Corpus train;
  Corpus dev;
  AugmentLexicons lexicons;
};

/// Lexicons matching the generator's vocabulary: group gazetteer and
/// replacement pool, adjective antonyms, verb synonyms and question templates.
AugmentLexicons synthetic_lexicons();

SynthCorpus generate_synthetic(const SynthConfig& config);

}  // namespace spancl
