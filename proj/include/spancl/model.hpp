#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spancl/contrastive.hpp"
#include "spancl/encoder.hpp"
#include "spancl/spanhead.hpp"

namespace spancl {

/// Everything trainable: shared encoder, span head, answerability classifier.
struct ModelParams {
  EncoderConfig config;
  EncoderParams encoder;
  SpanHeadParams head;
  AnswerabilityParams classifier;

  static ModelParams init(const EncoderConfig& config, std::uint64_t seed);
  static ModelParams zeros(const EncoderConfig& config);
  ModelParams zeros_like() const { return zeros(config); }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    EncoderParams::visit(self.encoder, f);
    SpanHeadParams::visit(self.head, f);
    AnswerabilityParams::visit(self.classifier, f);
  }

  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  bool all_finite() const;
};

/// Binary container: magic, JSON header (config, vocab hash, tensor table,
/// free-form metadata), then little-endian float64 payload. Reload is bit-exact.
void save_checkpoint(const ModelParams& params, std::uint64_t vocab_hash, const nlohmann::json& metadata,
                     const std::string& path);

struct Checkpoint {
  ModelParams params;
  std::uint64_t vocab_hash = 0;
  nlohmann::json metadata;
};
Checkpoint load_checkpoint(const std::string& path);

// Finite-difference verification of analytic gradients.

/// Computes the loss and accumulates its gradient into the zeroed `grads`.
using LossAndGrad = std::function<double(const ModelParams& params, ModelParams& grads)>;

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t coordinates = 240;
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  /// Denominator floor: rel = |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst_coordinate;
  double worst_analytic = 0;
  double worst_numeric = 0;
  bool passed = true;
};

/// Central differences on a random coordinate subset, drawn round-robin
/// across tensors so small tensors are always represented.
GradCheckReport finite_difference_check(const LossAndGrad& loss_fn, const ModelParams& params,
                                        const GradCheckOptions& options = {});

}  // namespace spancl
