#pragma once

#include <random>
#include <vector>

#include "spancl/model.hpp"
#include "spancl/textproc.hpp"
#include "spancl/training.hpp"

namespace testing {

inline spancl::EncoderConfig tiny_config(int hidden = 8, int seq = 12) {
  spancl::EncoderConfig c;
  c.vocab_size = 20;
  c.max_seq_len = seq;
  c.hidden = hidden;
  c.layers = 2;
  c.heads = 2;
  c.ff_mult = 2;
  c.init_std = 0.4;
  return c;
}

/// [CLS] q q q [SEP] p ... p [SEP] with random ids; 12 positions.
inline spancl::FeatureWindow random_window(std::mt19937_64& rng, int seq = 12, int q_len = 3) {
  spancl::FeatureWindow w;
  w.input_ids.push_back(spancl::Vocabulary::kCls);
  for (int i = 0; i < q_len; ++i) w.input_ids.push_back(4 + static_cast<int>(rng() % 16));
  w.input_ids.push_back(spancl::Vocabulary::kSep);
  w.passage_token_offset = static_cast<int>(w.input_ids.size());
  while (static_cast<int>(w.input_ids.size()) < seq - 1) w.input_ids.push_back(4 + static_cast<int>(rng() % 16));
  w.input_ids.push_back(spancl::Vocabulary::kSep);
  w.valid_len = seq;
  w.window_len = seq - 1 - w.passage_token_offset;
  return w;
}

inline spancl::TripleFeatures random_triple(std::mt19937_64& rng, int seq = 12) {
  spancl::TripleFeatures t;
  t.question_id = "q";
  t.org = random_window(rng, seq, 3);
  t.pos = random_window(rng, seq, 4);
  t.neg = random_window(rng, seq, 3);
  t.span_org = {t.org.passage_token_offset + 1, t.org.passage_token_offset + 2};
  t.span_pos = {t.pos.passage_token_offset + 1, t.pos.passage_token_offset + 2};
  t.span_neg = {t.neg.passage_token_offset + 1, t.neg.passage_token_offset + 2};
  t.org.label = t.span_org;
  t.pos.label = t.span_pos;
  t.neg.label = {0, 0};
  return t;
}

}  // namespace testing
