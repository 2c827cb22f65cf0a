#include "spancl/spanhead.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spancl/common.hpp"

namespace spancl {

SpanHeadParams SpanHeadParams::init(int hidden, double std, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "span_head.init"));
  std::normal_distribution<double> dist(0.0, std);
  SpanHeadParams p = zeros(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) p.w_start(0, i) = dist(rng);
  for (Eigen::Index i = 0; i < hidden; ++i) p.w_end(0, i) = dist(rng);
  return p;
}

SpanHeadParams SpanHeadParams::zeros(int hidden) { return {Mat::Zero(1, hidden), Mat::Zero(1, hidden)}; }

SpanLogits start_end_logits(const Mat& H, const SpanHeadParams& head, int valid_len) {
  if (valid_len > H.rows()) throw InputError("valid_len exceeds the hidden matrix");
  if (H.cols() != head.w_start.cols()) throw InputError("span head width does not match the hidden size");
  SpanLogits out;
  out.start.resize(static_cast<std::size_t>(valid_len));
  out.end.resize(static_cast<std::size_t>(valid_len));
  for (int i = 0; i < valid_len; ++i) {
    out.start[static_cast<std::size_t>(i)] = H.row(i).dot(head.w_start.row(0));
    out.end[static_cast<std::size_t>(i)] = H.row(i).dot(head.w_end.row(0));
  }
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    z += out[i];
  }
  for (auto& p : out) p /= z;
  return out;
}

SpanDistribution span_probabilities(std::span<const double> start, std::span<const double> end) {
  return {softmax(start), softmax(end)};
}

SpanLoss span_loss(const SpanDistribution& dist, TokenSpan label) {
  if (label.start < 0 || label.end < 0 || static_cast<std::size_t>(label.start) >= dist.p_start.size() ||
      static_cast<std::size_t>(label.end) >= dist.p_end.size()) {
    throw InputError("span label outside the valid positions");
  }
  SpanLoss out;
  double ps = dist.p_start[static_cast<std::size_t>(label.start)];
  double pe = dist.p_end[static_cast<std::size_t>(label.end)];
  if (ps < kProbabilityFloor) {
    ps = kProbabilityFloor;
    out.clamped = true;
  }
  if (pe < kProbabilityFloor) {
    pe = kProbabilityFloor;
    out.clamped = true;
  }
  out.value = -std::log(ps) - std::log(pe);
  return out;
}

SpanLoss span_loss_backward(const Mat& H, int valid_len, const SpanHeadParams& head, TokenSpan label,
                            double weight, Mat& dH, SpanHeadParams& dhead) {
  const auto logits = start_end_logits(H, head, valid_len);
  const auto dist = span_probabilities(logits.start, logits.end);
  const auto loss = span_loss(dist, label);
  for (int i = 0; i < valid_len; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double ds = weight * (dist.p_start[k] - (i == label.start ? 1.0 : 0.0));
    const double de = weight * (dist.p_end[k] - (i == label.end ? 1.0 : 0.0));
    dH.row(i) += ds * head.w_start.row(0) + de * head.w_end.row(0);
    dhead.w_start.row(0) += ds * H.row(i);
    dhead.w_end.row(0) += de * H.row(i);
  }
  return loss;
}

DecodedSpan decode_answer(std::span<const double> start, std::span<const double> end, PassageRange passage,
                          const DecodeConfig& config) {
  if (start.empty() || end.size() != start.size()) throw InputError("decode_answer needs matching non-empty scores");
  DecodedSpan out;
  out.null_score = start[0] + end[0];
  const int n = static_cast<int>(start.size());
  const int b = std::max(passage.begin, 1);
  const int e = std::min(passage.end, n);
  for (int i = b; i < e; ++i) {
    const int j_max = std::min(e, i + config.max_answer_len);
    for (int j = i; j < j_max; ++j) {
      const double score = start[static_cast<std::size_t>(i)] + end[static_cast<std::size_t>(j)];
      if (!out.has_candidate || score > out.best_non_null) {
        out.best_non_null = score;
        out.span = TokenSpan{i, j};
        out.has_candidate = true;
      }
    }
  }
  if (!out.has_candidate || out.null_score + config.null_threshold >= out.best_non_null) {
    out.span.reset();
    out.score = out.null_score;
  } else {
    out.score = out.best_non_null;
  }
  return out;
}

}  // namespace spancl
