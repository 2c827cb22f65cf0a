#include "spancl/encoder.hpp"

#include <cmath>
#include <random>

#include "spancl/common.hpp"

namespace spancl {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void layer_norm(const Mat& x, const Mat& gain, const Mat& bias, Mat& xhat, Vec& rstd, Mat& y) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  xhat.resize(n, x.cols());
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mean).square().sum() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

/// Returns dx; accumulates gain/bias gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd, const Mat& gain, Mat& dgain,
                        Mat& dbias) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

/// dX = dY W^T, dW += X^T dY, db += colsum(dY)
Mat affine_backward(const Mat& dy, const Mat& x, const Mat& w, Mat& dw, Mat& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  return dy * w.transpose();
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * kInvSqrt2)); }

double gelu_grad(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
  return cdf + u * kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

void softmax_rows(Mat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

Mat normal_matrix(Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must cover the four special tokens");
  if (max_seq_len < 4) throw ConfigError("max_seq_len too small");
  if (hidden < 1 || layers < 0 || heads < 1 || ff_mult < 1) throw ConfigError("bad encoder dimensions");
  if (hidden % heads != 0) throw ConfigError("hidden size must be divisible by the number of heads");
  if (!(init_std > 0)) throw ConfigError("init_std must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"max_seq_len", max_seq_len}, {"hidden", hidden},
          {"layers", layers},         {"heads", heads},             {"ff_mult", ff_mult},
          {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& c) {
  const int d = c.hidden;
  const int f = c.hidden * c.ff_mult;
  EncoderParams p;
  p.token_embedding = Mat::Zero(c.vocab_size, d);
  p.position_embedding = Mat::Zero(c.max_seq_len, d);
  p.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& l : p.layers) {
    l.ln1_gain = Mat::Zero(1, d);
    l.ln1_bias = Mat::Zero(1, d);
    l.wq = Mat::Zero(d, d);
    l.bq = Mat::Zero(1, d);
    l.wk = Mat::Zero(d, d);
    l.bk = Mat::Zero(1, d);
    l.wv = Mat::Zero(d, d);
    l.bv = Mat::Zero(1, d);
    l.wo = Mat::Zero(d, d);
    l.bo = Mat::Zero(1, d);
    l.ln2_gain = Mat::Zero(1, d);
    l.ln2_bias = Mat::Zero(1, d);
    l.w1 = Mat::Zero(d, f);
    l.b1 = Mat::Zero(1, f);
    l.w2 = Mat::Zero(f, d);
    l.b2 = Mat::Zero(1, d);
  }
  p.final_ln_gain = Mat::Zero(1, d);
  p.final_ln_bias = Mat::Zero(1, d);
  return p;
}

EncoderParams EncoderParams::init(const EncoderConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(derive_seed(seed, "encoder.init"));
  const int d = c.hidden;
  const int f = c.hidden * c.ff_mult;
  EncoderParams p = zeros(c);
  p.token_embedding = normal_matrix(c.vocab_size, d, c.init_std, rng);
  p.position_embedding = normal_matrix(c.max_seq_len, d, c.init_std, rng);
  for (auto& l : p.layers) {
    l.ln1_gain.setOnes();
    l.ln2_gain.setOnes();
    l.wq = normal_matrix(d, d, c.init_std, rng);
    l.wk = normal_matrix(d, d, c.init_std, rng);
    l.wv = normal_matrix(d, d, c.init_std, rng);
    l.wo = normal_matrix(d, d, c.init_std, rng);
    l.w1 = normal_matrix(d, f, c.init_std, rng);
    l.w2 = normal_matrix(f, d, c.init_std, rng);
  }
  p.final_ln_gain.setOnes();
  return p;
}

EncoderOutput encode(std::span<const int> ids, int valid_len, const EncoderParams& params,
                     const EncoderConfig& config, EncoderTape* tape) {
  const int l = static_cast<int>(ids.size());
  if (valid_len < 0 || valid_len > l) throw InputError("valid_len outside the input");
  if (l > config.max_seq_len) throw InputError("input longer than max_seq_len");
  for (int i = 0; i < l; ++i) {
    if (ids[static_cast<std::size_t>(i)] < 0 || ids[static_cast<std::size_t>(i)] >= config.vocab_size) {
      throw InputError("token id " + std::to_string(ids[static_cast<std::size_t>(i)]) + " at position " +
                       std::to_string(i) + " is outside the vocabulary");
    }
  }
  const int n = valid_len;
  const int d = config.hidden;
  const int heads = config.heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderOutput out;
  out.valid_len = n;
  out.H = Mat::Zero(l, d);
  if (tape != nullptr) {
    tape->ids.assign(ids.begin(), ids.begin() + n);
    tape->valid_len = n;
    tape->layers.clear();
  }
  if (n == 0) return out;

  Mat x(n, d);
  for (int i = 0; i < n; ++i) {
    x.row(i) = params.token_embedding.row(ids[static_cast<std::size_t>(i)]) + params.position_embedding.row(i);
  }

  for (const auto& lp : params.layers) {
    EncoderTape::Layer local;
    auto& t = tape != nullptr ? tape->layers.emplace_back() : local;
    t.input = x;
    layer_norm(x, lp.ln1_gain, lp.ln1_bias, t.xhat1, t.rstd1, t.a);
    t.q = affine(t.a, lp.wq, lp.bq);
    t.k = affine(t.a, lp.wk, lp.bk);
    t.v = affine(t.a, lp.wv, lp.bv);
    t.context.resize(n, d);
    t.probs.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Mat s = (t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose()) * scale;
      softmax_rows(s);
      t.context.middleCols(h * dh, dh).noalias() = s * t.v.middleCols(h * dh, dh);
      t.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    t.mid = x + affine(t.context, lp.wo, lp.bo);
    layer_norm(t.mid, lp.ln2_gain, lp.ln2_bias, t.xhat2, t.rstd2, t.b);
    t.u = affine(t.b, lp.w1, lp.b1);
    t.g = t.u.unaryExpr([](double u) { return gelu(u); });
    x = t.mid + affine(t.g, lp.w2, lp.b2);
  }

  Mat xhatf;
  Vec rstdf;
  Mat h;
  layer_norm(x, params.final_ln_gain, params.final_ln_bias, xhatf, rstdf, h);
  out.H.topRows(n) = h;
  if (tape != nullptr) {
    tape->last = std::move(x);
    tape->xhatf = std::move(xhatf);
    tape->rstdf = std::move(rstdf);
  }
  return out;
}

EncoderOutput encode(const FeatureWindow& window, const EncoderParams& params, const EncoderConfig& config,
                     EncoderTape* tape) {
  return encode(window.input_ids, window.valid_len, params, config, tape);
}

void encode_backward(const EncoderTape& tape, const Mat& dH, const EncoderParams& params,
                     const EncoderConfig& config, EncoderParams& grads) {
  const int n = tape.valid_len;
  if (n == 0) return;
  const int heads = config.heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dx = layer_norm_backward(dH.topRows(n), tape.xhatf, tape.rstdf, params.final_ln_gain, grads.final_ln_gain,
                               grads.final_ln_bias);

  for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
    const auto& lp = params.layers[static_cast<std::size_t>(li)];
    auto& lg = grads.layers[static_cast<std::size_t>(li)];
    const auto& t = tape.layers[static_cast<std::size_t>(li)];

    // x_out = mid + FFN(LN2(mid))
    const Mat dg = affine_backward(dx, t.g, lp.w2, lg.w2, lg.b2);
    Mat du = dg;
    for (Eigen::Index i = 0; i < du.size(); ++i) du.data()[i] *= gelu_grad(t.u.data()[i]);
    const Mat db = affine_backward(du, t.b, lp.w1, lg.w1, lg.b1);
    Mat dmid = dx + layer_norm_backward(db, t.xhat2, t.rstd2, lp.ln2_gain, lg.ln2_gain, lg.ln2_bias);

    // mid = input + Attn(LN1(input))
    const Mat dcontext = affine_backward(dmid, t.context, lp.wo, lg.wo, lg.bo);
    Mat dq(n, config.hidden);
    Mat dk(n, config.hidden);
    Mat dv(n, config.hidden);
    for (int h = 0; h < heads; ++h) {
      const auto& p = t.probs[static_cast<std::size_t>(h)];
      const auto dc = dcontext.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dc;
      Mat dp = dc * t.v.middleCols(h * dh, dh).transpose();
      const Vec row_dot = (dp.array() * p.array()).rowwise().sum();
      Mat ds = p.array() * (dp.array().colwise() - row_dot.array());
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * t.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * t.q.middleCols(h * dh, dh);
    }
    Mat da = affine_backward(dq, t.a, lp.wq, lg.wq, lg.bq);
    da += affine_backward(dk, t.a, lp.wk, lg.wk, lg.bk);
    da += affine_backward(dv, t.a, lp.wv, lg.wv, lg.bv);
    dx = dmid + layer_norm_backward(da, t.xhat1, t.rstd1, lp.ln1_gain, lg.ln1_gain, lg.ln1_bias);
  }

  for (int i = 0; i < n; ++i) {
    grads.token_embedding.row(tape.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.position_embedding.row(i) += dx.row(i);
  }
}

}  // namespace spancl
