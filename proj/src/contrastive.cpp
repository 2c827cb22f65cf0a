#include "spancl/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "spancl/common.hpp"

namespace spancl {

void LossWeights::validate() const {
  if (!(tau > 0)) throw ConfigError("temperature must be positive");
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("loss weights must be non-negative");
}

std::string to_string(RepresentationMode m) {
  switch (m) {
    case RepresentationMode::Span: return "span";
    case RepresentationMode::Cls: return "cls";
    case RepresentationMode::Both: return "both";
  }
  return "span";
}

RepresentationMode representation_mode_from_string(std::string_view s) {
  if (s == "span") return RepresentationMode::Span;
  if (s == "cls") return RepresentationMode::Cls;
  if (s == "both") return RepresentationMode::Both;
  throw ConfigError("unknown representation mode: " + std::string(s));
}

Vec span_representation(const Mat& H, int y_s, int y_e, int valid_len) {
  if (y_s < 0 || y_e < y_s || y_s >= valid_len || y_e >= valid_len || valid_len > H.rows()) {
    throw InputError("span position outside the valid sequence");
  }
  const auto d = H.cols();
  Vec z(2 * d);
  z.head(d) = H.row(y_s).transpose();
  z.tail(d) = H.row(y_e).transpose();
  return z;
}

void span_representation_backward(const Vec& dz, int y_s, int y_e, Mat& dH) {
  const auto d = dH.cols();
  dH.row(y_s) += dz.head(d).transpose();
  dH.row(y_e) += dz.tail(d).transpose();
}

double cosine_similarity(const Vec& u, const Vec& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0) || !(nv > 0)) throw DegenerateRepresentation("cosine similarity of a zero-norm vector");
  return u.dot(v) / (nu * nv);
}

CosineGrad cosine_similarity_grad(const Vec& u, const Vec& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0) || !(nv > 0)) throw DegenerateRepresentation("cosine similarity of a zero-norm vector");
  CosineGrad g;
  g.value = u.dot(v) / (nu * nv);
  g.du = v / (nu * nv) - g.value * u / (nu * nu);
  g.dv = u / (nu * nv) - g.value * v / (nv * nv);
  return g;
}

ContrastiveLoss spancl_loss(const Vec& z_org, const Vec& z_pos, const std::vector<Vec>& z_negs, double tau) {
  if (!(tau > 0)) throw ConfigError("temperature must be positive");
  if (z_negs.empty()) throw InputError("spancl_loss needs at least one negative");
  const auto pos = cosine_similarity_grad(z_org, z_pos);
  std::vector<CosineGrad> negs;
  negs.reserve(z_negs.size());
  for (const auto& zn : z_negs) negs.push_back(cosine_similarity_grad(z_org, zn));

  // loss = log(1 + Σ exp(δ_k)), δ_k = (Φ_neg_k - Φ_pos)/τ
  std::vector<double> delta(negs.size());
  double m = 0;
  for (std::size_t k = 0; k < negs.size(); ++k) {
    delta[k] = (negs[k].value - pos.value) / tau;
    m = std::max(m, delta[k]);
  }
  double rest = 0;
  for (double dk : delta) rest += std::exp(dk - m);
  ContrastiveLoss out;
  out.value = m == 0 ? std::log1p(rest) : m + std::log(std::exp(-m) + rest);
  out.sim_pos = pos.value;
  out.sim_neg = negs.front().value;

  // Softmax weights of the negatives; the positive's weight is 1 - Σ w_k.
  const double denom = std::exp(-m) + rest;
  double w_sum = 0;
  std::vector<double> w(negs.size());
  for (std::size_t k = 0; k < negs.size(); ++k) {
    w[k] = std::exp(delta[k] - m) / denom;
    w_sum += w[k];
  }
  const double g_pos = -w_sum / tau;  // dL/dΦ_pos
  out.grad_org = g_pos * pos.du;
  out.grad_pos = g_pos * pos.dv;
  out.grad_neg.reserve(negs.size());
  for (std::size_t k = 0; k < negs.size(); ++k) {
    const double g_neg = w[k] / tau;
    out.grad_org += g_neg * negs[k].du;
    out.grad_neg.push_back(g_neg * negs[k].dv);
  }
  return out;
}

ContrastiveLoss spancl_loss(const Vec& z_org, const Vec& z_pos, const Vec& z_neg, double tau) {
  return spancl_loss(z_org, z_pos, std::vector<Vec>{z_neg}, tau);
}

double combined_loss(double span_loss, double spancl, const LossWeights& weights) {
  return weights.lambda1 * span_loss + weights.lambda2 * spancl;
}

AnswerabilityParams AnswerabilityParams::zeros(int hidden) { return {Mat::Zero(1, hidden), Mat::Zero(1, 1)}; }

double answerability_logit(const Mat& H, const AnswerabilityParams& params, RepresentationMode mode) {
  if (!uses_classifier(mode)) throw ConfigError("answerability classifier is disabled in span mode");
  if (H.rows() < 1) throw InputError("empty hidden matrix");
  return H.row(0).dot(params.w.row(0)) + params.bias(0, 0);
}

BinaryCrossEntropy bce_with_logit(double logit, bool answerable) {
  const double y = answerable ? 1.0 : 0.0;
  BinaryCrossEntropy out;
  out.value = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  out.dlogit = 1.0 / (1.0 + std::exp(-logit)) - y;
  return out;
}

}  // namespace spancl
