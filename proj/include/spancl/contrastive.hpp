#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spancl/encoder.hpp"

namespace spancl {

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double tau = 0.05;

  void validate() const;
};

/// Which representation the contrastive term compares: the answer span,
/// the [CLS] row, or both (two losses summed).
enum class RepresentationMode { Span, Cls, Both };

std::string to_string(RepresentationMode m);
RepresentationMode representation_mode_from_string(std::string_view s);
inline bool uses_classifier(RepresentationMode m) { return m != RepresentationMode::Span; }

/// z = [h_{y_s}; h_{y_e}] (length 2d).
Vec span_representation(const Mat& H, int y_s, int y_e, int valid_len);
/// Adds a gradient with respect to z back onto rows y_s and y_e of dH.
void span_representation_backward(const Vec& dz, int y_s, int y_e, Mat& dH);

/// u.v / (|u||v|). Throws DegenerateRepresentation on a zero-norm input.
double cosine_similarity(const Vec& u, const Vec& v);

struct CosineGrad {
  double value = 0;
  Vec du;
  Vec dv;
};
CosineGrad cosine_similarity_grad(const Vec& u, const Vec& v);

struct ContrastiveLoss {
  double value = 0;
  double sim_pos = 0;
  double sim_neg = 0;  // first negative
  Vec grad_org;
  Vec grad_pos;
  std::vector<Vec> grad_neg;
};

/// -log( e^{Φ(org,pos)/τ} / (e^{Φ(org,pos)/τ} + Σ_k e^{Φ(org,neg_k)/τ}) ),
/// evaluated in log-sum-exp form. With a single negative this is the
/// one-positive/one-negative spanCL loss.
ContrastiveLoss spancl_loss(const Vec& z_org, const Vec& z_pos, const std::vector<Vec>& z_negs, double tau);
ContrastiveLoss spancl_loss(const Vec& z_org, const Vec& z_pos, const Vec& z_neg, double tau);

/// λ1·L_span + λ2·L_spanCL
double combined_loss(double span_loss, double spancl, const LossWeights& weights);

/// Linear answerability classifier on the [CLS] row.
struct AnswerabilityParams {
  Mat w;     // 1 x d
  Mat bias;  // 1 x 1

  static AnswerabilityParams zeros(int hidden);

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(std::string("answerability.w"), self.w);
    f(std::string("answerability.bias"), self.bias);
  }
};

/// h_0 . w + b. Throws ConfigError in span mode, where the classifier is off.
double answerability_logit(const Mat& H, const AnswerabilityParams& params, RepresentationMode mode);

struct BinaryCrossEntropy {
  double value = 0;
  double dlogit = 0;
};
/// Numerically stable BCE on a logit; target 1 means answerable.
BinaryCrossEntropy bce_with_logit(double logit, bool answerable);

}  // namespace spancl
