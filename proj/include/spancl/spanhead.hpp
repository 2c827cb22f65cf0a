#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spancl/encoder.hpp"
#include "spancl/textproc.hpp"

namespace spancl {

struct SpanHeadParams {
  Mat w_start;  // 1 x d
  Mat w_end;    // 1 x d

  static SpanHeadParams init(int hidden, double std, std::uint64_t seed);
  static SpanHeadParams zeros(int hidden);

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(std::string("span_head.w_start"), self.w_start);
    f(std::string("span_head.w_end"), self.w_end);
  }
};

struct SpanLogits {
  std::vector<double> start;
  std::vector<double> end;
};

struct SpanDistribution {
  std::vector<double> p_start;
  std::vector<double> p_end;
};

/// s_i = h_i . w_start and e_i = h_i . w_end for i < valid_len.
SpanLogits start_end_logits(const Mat& H, const SpanHeadParams& head, int valid_len);

/// Max-subtracted softmax of a score vector.
std::vector<double> softmax(std::span<const double> scores);
SpanDistribution span_probabilities(std::span<const double> start, std::span<const double> end);

struct SpanLoss {
  double value = 0;
  bool clamped = false;  // a label probability fell below the 1e-12 floor
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -log p_start[y_s] - log p_end[y_e]; (0,0) is the no-answer label.
SpanLoss span_loss(const SpanDistribution& dist, TokenSpan label);

/// Span loss of one window, with d(weight * loss) accumulated into `dH`
/// rows and the head gradients.
SpanLoss span_loss_backward(const Mat& H, int valid_len, const SpanHeadParams& head, TokenSpan label,
                            double weight, Mat& dH, SpanHeadParams& dhead);

/// Half-open range of sequence positions that may hold an answer.
struct PassageRange {
  int begin = 0;
  int end = 0;
};

struct DecodeConfig {
  int max_answer_len = 30;
  double null_threshold = 0.0;
};

struct DecodedSpan {
  std::optional<TokenSpan> span;  // nullopt means NO_ANSWER
  double score = 0;               // best non-null score, or the null score for NO_ANSWER
  double null_score = 0;
  double best_non_null = 0;
  bool has_candidate = false;
};

/// Best (i, j) over passage positions with i <= j and j - i + 1 <= max_answer_len,
/// compared against s_0 + e_0. Ties go to the earlier, then shorter, span.
DecodedSpan decode_answer(std::span<const double> start, std::span<const double> end, PassageRange passage,
                          const DecodeConfig& config);

}  // namespace spancl
