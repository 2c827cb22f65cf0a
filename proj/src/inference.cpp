#include "spancl/inference.hpp"

#include "spancl/common.hpp"

namespace spancl {

EvalFeatures prepare_eval_features(const Corpus& corpus, const Vocabulary& vocab, const WindowConfig& window) {
  EvalFeatures f;
  for (const auto& p : corpus.passages()) {
    f.passage_tokens.emplace(p.id, tokenize(p.text, vocab));
    f.passage_text.emplace(p.id, p.text);
  }
  f.questions.reserve(corpus.examples().size());
  for (const auto& ex : corpus.examples()) {
    const auto q = tokenize(ex.question, vocab);
    f.questions.push_back({ex.id, ex.passage_id, make_windows(q, f.passage_tokens.at(ex.passage_id), std::nullopt, window)});
  }
  return f;
}

WindowScore score_window(const ModelParams& params, const FeatureWindow& window, const DecodeConfig& decode) {
  const auto enc = encode(window, params.encoder, params.config);
  const auto logits = start_end_logits(enc.H, params.head, enc.valid_len);
  const PassageRange range{window.passage_token_offset, window.passage_token_offset + window.window_len};
  DecodeConfig raw = decode;
  raw.null_threshold = 0;
  const auto d = decode_answer(logits.start, logits.end, range, raw);
  WindowScore s;
  s.has_candidate = d.has_candidate;
  s.best_non_null = d.best_non_null;
  s.null_score = d.null_score;
  if (d.has_candidate) {
    // decode_answer drops the span when null wins; recover the candidate itself.
    DecodeConfig forced = decode;
    forced.null_threshold = -std::numeric_limits<double>::infinity();
    const auto best = decode_answer(logits.start, logits.end, range, forced);
    s.passage_span = {window.to_passage_token(best.span->start), window.to_passage_token(best.span->end)};
  }
  return s;
}

QuestionPrediction aggregate_windows(const std::vector<WindowScore>& windows, const TokenSequence& passage_tokens,
                                     const std::string& passage_text, double null_threshold) {
  QuestionPrediction out;
  const WindowScore* best = nullptr;
  bool have_null = false;
  for (const auto& w : windows) {
    if (!have_null || w.null_score < out.min_null) {
      out.min_null = w.null_score;
      have_null = true;
    }
    if (w.has_candidate && (best == nullptr || w.best_non_null > best->best_non_null)) best = &w;
  }
  if (best == nullptr) return out;
  out.best_non_null = best->best_non_null;
  if (out.min_null + null_threshold >= best->best_non_null) return out;
  const auto b = passage_tokens.char_spans.at(static_cast<std::size_t>(best->passage_span.start)).start;
  const auto e = passage_tokens.char_spans.at(static_cast<std::size_t>(best->passage_span.end)).end;
  out.text = utf8::substr(passage_text, b, e - b);
  out.no_answer = false;
  return out;
}

Predictions predict(const ModelParams& params, const EvalFeatures& features, const DecodeConfig& decode) {
  Predictions out;
  for (const auto& q : features.questions) {
    std::vector<WindowScore> scores;
    scores.reserve(q.windows.size());
    for (const auto& w : q.windows) scores.push_back(score_window(params, w, decode));
    const auto pred = aggregate_windows(scores, features.passage_tokens.at(q.passage_id),
                                        features.passage_text.at(q.passage_id), decode.null_threshold);
    out[q.id] = pred.text;
  }
  return out;
}

}  // namespace spancl
