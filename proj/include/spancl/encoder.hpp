#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spancl/textproc.hpp"

namespace spancl {

/// Row-major so that row i of a hidden matrix is token i.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct EncoderConfig {
  int vocab_size = 4;
  int max_seq_len = 512;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ff_mult = 4;
  double init_std = 0.02;

  int head_dim() const { return hidden / heads; }
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Mat ln1_gain, ln1_bias;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_gain, ln2_bias;
  Mat w1, b1, w2, b2;

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "ln1.gain", self.ln1_gain);
    f(prefix + "ln1.bias", self.ln1_bias);
    f(prefix + "attn.wq", self.wq);
    f(prefix + "attn.bq", self.bq);
    f(prefix + "attn.wk", self.wk);
    f(prefix + "attn.bk", self.bk);
    f(prefix + "attn.wv", self.wv);
    f(prefix + "attn.bv", self.bv);
    f(prefix + "attn.wo", self.wo);
    f(prefix + "attn.bo", self.bo);
    f(prefix + "ln2.gain", self.ln2_gain);
    f(prefix + "ln2.bias", self.ln2_bias);
    f(prefix + "ffn.w1", self.w1);
    f(prefix + "ffn.b1", self.b1);
    f(prefix + "ffn.w2", self.w2);
    f(prefix + "ffn.b2", self.b2);
  }
};

/// Pre-layer-norm transformer with learned positions and a final layer norm.
struct EncoderParams {
  Mat token_embedding;     // vocab x d
  Mat position_embedding;  // max_seq_len x d
  std::vector<LayerParams> layers;
  Mat final_ln_gain, final_ln_bias;

  /// Seeded normal(0, init_std) weights; zero biases; unit layer-norm gains.
  static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);
  /// Same shapes, all zeros.
  static EncoderParams zeros(const EncoderConfig& config);

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(std::string("encoder.token_embedding"), self.token_embedding);
    f(std::string("encoder.position_embedding"), self.position_embedding);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      LayerParams::visit(self.layers[i], "encoder.layer" + std::to_string(i) + ".", f);
    }
    f(std::string("encoder.final_ln.gain"), self.final_ln_gain);
    f(std::string("encoder.final_ln.bias"), self.final_ln_bias);
  }
};

struct EncoderOutput {
  Mat H;  // l x d; rows >= valid_len are zero
  int valid_len = 0;
};

/// Activations kept by the forward pass for the backward pass.
struct EncoderTape {
  struct Layer {
    Mat input;
    Mat xhat1;
    Vec rstd1;
    Mat a, q, k, v;
    std::vector<Mat> probs;  // one n x n matrix per head
    Mat context;
    Mat mid;
    Mat xhat2;
    Vec rstd2;
    Mat b, u, g;
  };
  std::vector<int> ids;
  int valid_len = 0;
  std::vector<Layer> layers;
  Mat last;
  Mat xhatf;
  Vec rstdf;
};

/// Only the first `valid_len` positions are computed; padding never enters
/// attention. Throws InputError for ids outside the vocabulary.
EncoderOutput encode(std::span<const int> ids, int valid_len, const EncoderParams& params,
                     const EncoderConfig& config, EncoderTape* tape = nullptr);
EncoderOutput encode(const FeatureWindow& window, const EncoderParams& params, const EncoderConfig& config,
                     EncoderTape* tape = nullptr);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/dH.
void encode_backward(const EncoderTape& tape, const Mat& dH, const EncoderParams& params,
                     const EncoderConfig& config, EncoderParams& grads);

}  // namespace spancl
