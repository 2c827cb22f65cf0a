#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "spancl/corpus.hpp"
#include "spancl/evaluation.hpp"
#include "spancl/model.hpp"
#include "spancl/spanhead.hpp"
#include "spancl/textproc.hpp"

namespace spancl {

/// Tokenized and windowed questions of a corpus, ready for repeated decoding.
struct EvalFeatures {
  struct Question {
    std::string id;
    std::string passage_id;
    std::vector<FeatureWindow> windows;
  };
  std::vector<Question> questions;
  std::unordered_map<std::string, TokenSequence> passage_tokens;
  std::unordered_map<std::string, std::string> passage_text;
};

EvalFeatures prepare_eval_features(const Corpus& corpus, const Vocabulary& vocab, const WindowConfig& window);

struct WindowScore {
  bool has_candidate = false;
  double best_non_null = 0;
  double null_score = 0;
  TokenSpan passage_span;  // passage token coordinates of the best candidate
};

struct QuestionPrediction {
  std::string text;  // empty for NO_ANSWER
  bool no_answer = true;
  double best_non_null = 0;
  double min_null = 0;
};

/// Highest non-null window answer against the smallest null score across
/// windows; NO_ANSWER iff min_null + threshold >= best_non_null.
QuestionPrediction aggregate_windows(const std::vector<WindowScore>& windows, const TokenSequence& passage_tokens,
                                     const std::string& passage_text, double null_threshold);

WindowScore score_window(const ModelParams& params, const FeatureWindow& window, const DecodeConfig& decode);

Predictions predict(const ModelParams& params, const EvalFeatures& features, const DecodeConfig& decode);

}  // namespace spancl
