#include "spancl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

namespace spancl {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Joint: return "joint";
    case Scheme::Alternate: return "alternate";
    case Scheme::PretrainFinetune: return "pretrain_finetune";
  }
  return "joint";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "joint") return Scheme::Joint;
  if (s == "alternate") return Scheme::Alternate;
  if (s == "pretrain_finetune") return Scheme::PretrainFinetune;
  throw ConfigError("unknown scheme: " + std::string(s));
}

ActiveLosses select_active_losses(std::size_t step_index, Scheme scheme, int m_interval, std::size_t phase1_steps) {
  switch (scheme) {
    case Scheme::Joint: return {true, true};
    case Scheme::Alternate: {
      if (m_interval < 1) throw ConfigError("alternate interval M must be >= 1");
      const auto period = static_cast<std::size_t>(m_interval) + 1;
      if (step_index % period == static_cast<std::size_t>(m_interval)) return {false, true};
      return {true, false};
    }
    case Scheme::PretrainFinetune:
      if (step_index < phase1_steps) return {false, true};
      return {true, false};
  }
  return {true, true};
}

// ---------------------------------------------------------------------------
// Config

TrainConfig TrainConfig::toy_defaults() {
  TrainConfig c;
  c.encoder.max_seq_len = c.window.max_seq_len;
  return c;
}

TrainConfig TrainConfig::full_defaults() {
  TrainConfig c;
  c.learning_rate = 2e-5;
  c.batch_size = 12;
  c.epochs = 2;
  c.warmup_fraction = 0.1;
  c.window = WindowConfig{512, 128, 64};
  c.encoder.max_seq_len = c.window.max_seq_len;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw ConfigError("warmup_fraction must be in [0,1)");
  if (m_interval < 1) throw ConfigError("m_interval must be >= 1");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  if (decode.max_answer_len < 1) throw ConfigError("max_answer_len must be >= 1");
  if (window.max_seq_len > encoder.max_seq_len) {
    throw ConfigError("window max_seq_len exceeds the encoder position table");
  }
  if (window.doc_stride < 1) throw ConfigError("doc_stride must be >= 1");
  weights.validate();
  encoder.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"warmup_fraction", warmup_fraction},
      {"scheme", to_string(scheme)},
      {"m_interval", m_interval},
      {"pretrain_epochs", pretrain_epochs},
      {"seed", seed},
      {"lambda1", weights.lambda1},
      {"lambda2", weights.lambda2},
      {"tau", weights.tau},
      {"rep_mode", to_string(rep_mode)},
      {"in_batch_negatives", in_batch_negatives},
      {"adam_beta1", adam_beta1},
      {"adam_beta2", adam_beta2},
      {"adam_eps", adam_eps},
      {"hidden", encoder.hidden},
      {"layers", encoder.layers},
      {"heads", encoder.heads},
      {"ff_mult", encoder.ff_mult},
      {"init_std", encoder.init_std},
      {"max_seq_len", window.max_seq_len},
      {"doc_stride", window.doc_stride},
      {"max_query_len", window.max_query_len},
      {"max_answer_len", decode.max_answer_len},
      {"null_threshold", decode.null_threshold},
      {"margin_probe", margin_probe},
  };
}

void TrainConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "learning_rate", "batch_size", "epochs", "warmup_fraction", "scheme", "m_interval", "pretrain_epochs",
      "seed", "lambda1", "lambda2", "tau", "rep_mode", "in_batch_negatives", "adam_beta1", "adam_beta2",
      "adam_eps", "hidden", "layers", "heads", "ff_mult", "init_std", "max_seq_len", "doc_stride",
      "max_query_len", "max_answer_len", "null_threshold", "margin_probe"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config field: " + key);
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("learning_rate", learning_rate);
    get("batch_size", batch_size);
    get("epochs", epochs);
    get("warmup_fraction", warmup_fraction);
    if (j.contains("scheme")) scheme = scheme_from_string(j.at("scheme").get<std::string>());
    get("m_interval", m_interval);
    get("pretrain_epochs", pretrain_epochs);
    get("seed", seed);
    get("lambda1", weights.lambda1);
    get("lambda2", weights.lambda2);
    get("tau", weights.tau);
    if (j.contains("rep_mode")) rep_mode = representation_mode_from_string(j.at("rep_mode").get<std::string>());
    get("in_batch_negatives", in_batch_negatives);
    get("adam_beta1", adam_beta1);
    get("adam_beta2", adam_beta2);
    get("adam_eps", adam_eps);
    get("hidden", encoder.hidden);
    get("layers", encoder.layers);
    get("heads", encoder.heads);
    get("ff_mult", encoder.ff_mult);
    get("init_std", encoder.init_std);
    get("max_seq_len", window.max_seq_len);
    get("doc_stride", window.doc_stride);
    get("max_query_len", window.max_query_len);
    get("max_answer_len", decode.max_answer_len);
    get("null_threshold", decode.null_threshold);
    get("margin_probe", margin_probe);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  encoder.max_seq_len = window.max_seq_len;
}

// ---------------------------------------------------------------------------
// Data preparation

Vocabulary build_vocabulary(const Corpus& train, const std::vector<ContrastiveTriple>& triples,
                            std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : train.passages()) count_tokens(tokenize(p.text), counts);
  for (const auto& ex : train.examples()) count_tokens(tokenize(ex.question), counts);
  for (const auto& t : triples) {
    count_tokens(tokenize(t.q_pos), counts);
    count_tokens(tokenize(t.q_neg), counts);
  }
  return Vocabulary::build(counts, min_freq);
}

namespace {

std::string question_key(const std::string& passage_id, const std::string& question) {
  return passage_id + '\x1f' + question;
}

/// First window of `question` holding the whole gold span, with the span's
/// sequence positions.
std::optional<std::pair<FeatureWindow, TokenSpan>> gold_window(const std::string& question,
                                                               const TokenSequence& passage, TokenSpan gold,
                                                               const Vocabulary& vocab,
                                                               const WindowConfig& config) {
  const auto q = tokenize(question, vocab);
  for (auto& w : make_windows(q, passage, gold, config)) {
    if (!w.contains(gold)) continue;
    const TokenSpan pos{w.to_sequence_position(gold.start), w.to_sequence_position(gold.end)};
    return std::make_pair(std::move(w), pos);
  }
  return std::nullopt;
}

}  // namespace

TrainingData prepare_training_data(const Corpus& train, const std::vector<ContrastiveTriple>& triples,
                                   const Vocabulary& vocab, const WindowConfig& window, bool include_plain) {
  TrainingData data;
  std::unordered_map<std::string, TokenSequence> passages;
  auto passage_tokens = [&](const std::string& id) -> const TokenSequence& {
    auto it = passages.find(id);
    if (it == passages.end()) it = passages.emplace(id, tokenize(train.passage(id).text, vocab)).first;
    return it->second;
  };

  std::set<std::string> covered;
  for (const auto& t : triples) {
    validate_triple(t, train);
    covered.insert(question_key(t.passage_id, t.q_org));
    covered.insert(question_key(t.passage_id, t.q_neg));
    const auto& ptoks = passage_tokens(t.passage_id);
    TokenSpan gold;
    try {
      gold = align_answer(ptoks, t.answer_char_start, t.answer_text);
    } catch (const AlignmentError&) {
      ++data.unusable_triples;
      continue;
    }
    auto org = gold_window(t.q_org, ptoks, gold, vocab, window);
    auto pos = gold_window(t.q_pos, ptoks, gold, vocab, window);
    auto neg = gold_window(t.q_neg, ptoks, gold, vocab, window);
    if (!org || !pos || !neg) {
      ++data.unusable_triples;
      continue;
    }
    TripleFeatures f;
    f.question_id = t.question_id;
    f.org = std::move(org->first);
    f.span_org = org->second;
    f.pos = std::move(pos->first);
    f.span_pos = pos->second;
    f.neg = std::move(neg->first);
    f.span_neg = neg->second;
    f.neg.label = {0, 0};
    data.items.emplace_back(std::move(f));
    ++data.triple_count;
  }

  if (!include_plain) return data;
  for (const auto& ex : train.examples()) {
    if (covered.count(question_key(ex.passage_id, ex.question))) continue;
    const auto& ptoks = passage_tokens(ex.passage_id);
    PlainFeatures f;
    f.question_id = ex.id;
    f.answerable = ex.answerable;
    if (ex.answerable) {
      TokenSpan gold;
      try {
        gold = align_answer(ptoks, ex.primary_answer().char_start, ex.primary_answer().text);
      } catch (const AlignmentError&) {
        continue;
      }
      auto w = gold_window(ex.question, ptoks, gold, vocab, window);
      if (!w) continue;
      f.window = std::move(w->first);
    } else {
      auto ws = make_windows(tokenize(ex.question, vocab), ptoks, std::nullopt, window);
      f.window = std::move(ws.front());
      f.window.label = {0, 0};
    }
    data.items.emplace_back(std::move(f));
    ++data.plain_count;
  }
  return data;
}

// ---------------------------------------------------------------------------
// Log

nlohmann::json StepRecord::to_json(bool include_wall_time) const {
  nlohmann::json j{
      {"step", step},
      {"epoch", epoch},
      {"active", nlohmann::json::array()},
      {"span_loss", span_loss},
      {"spancl_loss", spancl_loss},
      {"bce_loss", bce_loss},
      {"combined", combined},
      {"margin", margin},
      {"learning_rate", learning_rate},
      {"items", items},
      {"degenerate", degenerate},
      {"clamped", clamped},
  };
  if (active.span) j["active"].push_back("span");
  if (active.spancl) j["active"].push_back("spancl");
  if (include_wall_time) j["wall_ms"] = wall_ms;
  return j;
}

void TrainLog::save_jsonl(const std::string& path, bool include_wall_time) const {
  std::string out;
  for (const auto& r : steps) {
    out += r.to_json(include_wall_time).dump();
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Batch gradients

namespace {

struct Member {
  explicit Member(const FeatureWindow* w) : window(w) {}
  const FeatureWindow* window = nullptr;
  EncoderTape tape;
  Mat H;
  Mat dH;
  bool touched = false;
};

struct TripleReps {
  Member* org = nullptr;
  Member* pos = nullptr;
  Member* neg = nullptr;
  const TripleFeatures* features = nullptr;
};

Vec cls_representation(const Mat& H) { return H.row(0).transpose(); }

void add_cls_grad(const Vec& g, Mat& dH) { dH.row(0) += g.transpose(); }

}  // namespace

BatchOutcome compute_batch_gradients(std::span<const TrainItem* const> batch, const ModelParams& params,
                                     const TrainConfig& config, ActiveLosses active, ModelParams& grads) {
  BatchOutcome out;
  const auto& w = config.weights;
  const bool use_cls_head = uses_classifier(config.rep_mode);

  std::vector<Member> members;
  members.reserve(batch.size() * 3);
  std::vector<TripleReps> triples;
  std::vector<Member*> plains;
  // Pointers into `members` stay valid: capacity is reserved above.
  for (const TrainItem* item : batch) {
    if (const auto* t = std::get_if<TripleFeatures>(item)) {
      TripleReps r;
      r.features = t;
      members.emplace_back(&t->org);
      r.org = &members.back();
      members.emplace_back(&t->pos);
      r.pos = &members.back();
      members.emplace_back(&t->neg);
      r.neg = &members.back();
      triples.push_back(r);
    } else if (active.span) {
      members.emplace_back(&std::get<PlainFeatures>(*item).window);
      plains.push_back(&members.back());
    }
  }
  for (auto& m : members) {
    auto enc = encode(*m.window, params.encoder, params.config, &m.tape);
    m.H = std::move(enc.H);
    m.dH = Mat::Zero(m.H.rows(), m.H.cols());
  }

  const std::size_t contributing = triples.size() + plains.size();
  out.contributing = contributing;
  if (contributing == 0) return out;
  const double inv = 1.0 / static_cast<double>(contributing);

  double span_sum = 0, cl_sum = 0, bce_sum = 0, margin_sum = 0, total = 0;
  std::size_t span_terms = 0, cl_terms = 0, margin_terms = 0;

  auto span_term = [&](Member& m, TokenSpan label, double weight) {
    const auto r = span_loss_backward(m.H, m.window->valid_len, params.head, label, weight, m.dH, grads.head);
    if (weight != 0) m.touched = true;
    out.clamped = out.clamped || r.clamped;
    return r.value;
  };
  auto bce_term = [&](Member& m, bool answerable, double weight) {
    const double logit = answerability_logit(m.H, params.classifier, config.rep_mode);
    const auto b = bce_with_logit(logit, answerable);
    const double g = weight * b.dlogit;
    if (g != 0) {
      m.dH.row(0) += g * params.classifier.w;
      grads.classifier.w += g * m.H.row(0);
      grads.classifier.bias(0, 0) += g;
      m.touched = true;
    }
    return b.value;
  };

  if (active.span) {
    for (auto& r : triples) {
      const double ws = w.lambda1 * 0.5 * inv;
      const double lo = span_term(*r.org, r.features->org.label, ws);
      const double ln = span_term(*r.neg, TokenSpan{0, 0}, ws);
      double item = 0.5 * (lo + ln);
      span_sum += item;
      ++span_terms;
      if (use_cls_head) {
        const double b = 0.5 * (bce_term(*r.org, true, ws) + bce_term(*r.neg, false, ws));
        bce_sum += b;
        item += b;
      }
      total += w.lambda1 * item * inv;
    }
    for (Member* m : plains) {
      const double l = span_term(*m, m->window->label, w.lambda1 * inv);
      double item = l;
      span_sum += l;
      ++span_terms;
      if (use_cls_head) {
        const double b = bce_term(*m, m->window->has_answer(), w.lambda1 * inv);
        bce_sum += b;
        item += b;
      }
      total += w.lambda1 * item * inv;
    }
  }

  // Contrastive representations; margins are always measured on triples.
  struct Reps {
    Vec org, pos, neg;
    bool ok = false;
  };
  auto gather = [&](bool span_mode) {
    std::vector<Reps> reps(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const auto& r = triples[i];
      const auto& f = *r.features;
      if (span_mode) {
        reps[i].org = span_representation(r.org->H, f.span_org.start, f.span_org.end, f.org.valid_len);
        reps[i].pos = span_representation(r.pos->H, f.span_pos.start, f.span_pos.end, f.pos.valid_len);
        reps[i].neg = span_representation(r.neg->H, f.span_neg.start, f.span_neg.end, f.neg.valid_len);
      } else {
        reps[i].org = cls_representation(r.org->H);
        reps[i].pos = cls_representation(r.pos->H);
        reps[i].neg = cls_representation(r.neg->H);
      }
      reps[i].ok = true;
    }
    return reps;
  };

  auto contrastive = [&](bool span_mode, bool record_margin) {
    const auto reps = gather(span_mode);
    const double wc = active.spancl ? w.lambda2 * inv : 0.0;
    for (std::size_t i = 0; i < triples.size(); ++i) {
      auto& r = triples[i];
      const auto& f = *r.features;
      std::vector<Vec> negs{reps[i].neg};
      std::vector<std::size_t> neg_owner{i};
      if (config.in_batch_negatives) {
        for (std::size_t k = 0; k < triples.size(); ++k) {
          if (k == i) continue;
          negs.push_back(reps[k].neg);
          neg_owner.push_back(k);
        }
      }
      ContrastiveLoss cl;
      try {
        cl = spancl_loss(reps[i].org, reps[i].pos, negs, w.tau);
      } catch (const DegenerateRepresentation&) {
        ++out.degenerate;
        continue;
      }
      if (record_margin) {
        margin_sum += cl.sim_pos - cl.sim_neg;
        ++margin_terms;
      }
      if (!active.spancl) continue;
      cl_sum += cl.value;
      ++cl_terms;
      total += w.lambda2 * cl.value * inv;
      if (wc == 0) continue;
      auto push = [&](Member& m, const Vec& g, TokenSpan span) {
        if (span_mode) {
          span_representation_backward(wc * g, span.start, span.end, m.dH);
        } else {
          add_cls_grad(wc * g, m.dH);
        }
        m.touched = true;
      };
      push(*r.org, cl.grad_org, f.span_org);
      push(*r.pos, cl.grad_pos, f.span_pos);
      for (std::size_t k = 0; k < negs.size(); ++k) {
        auto& owner = triples[neg_owner[k]];
        push(*owner.neg, cl.grad_neg[k], owner.features->span_neg);
      }
    }
  };

  switch (config.rep_mode) {
    case RepresentationMode::Span: contrastive(true, true); break;
    case RepresentationMode::Cls:
      contrastive(false, false);
      {
        // The logged margin stays on the span representation for comparability.
        const ActiveLosses saved = active;
        active.spancl = false;
        contrastive(true, true);
        active = saved;
      }
      break;
    case RepresentationMode::Both:
      contrastive(true, true);
      contrastive(false, false);
      break;
  }

  out.combined = total;
  out.span_loss = span_terms ? span_sum / static_cast<double>(span_terms) : 0.0;
  out.spancl_loss = cl_terms ? cl_sum / static_cast<double>(cl_terms) : 0.0;
  out.bce_loss = span_terms && use_cls_head ? bce_sum / static_cast<double>(span_terms) : 0.0;
  out.margin = margin_terms ? margin_sum / static_cast<double>(margin_terms) : 0.0;

  if (std::isfinite(total)) {
    for (auto& m : members) {
      if (m.touched) encode_backward(m.tape, m.dH, params.encoder, params.config, grads.encoder);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule

AdamOptimizer::AdamOptimizer(const ModelParams& like, double beta1, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& P = *p[i].second;
    const auto& G = *g[i].second;
    auto& M = *m[i].second;
    auto& V = *v[i].second;
    M = beta1_ * M + (1 - beta1_) * G;
    V = beta2_ * V + (1 - beta2_) * G.cwiseProduct(G);
    P.array() -= learning_rate * (M.array() / c1) / ((V.array() / c2).sqrt() + eps_);
  }
}

double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& config) {
  if (total_steps == 0) return 0.0;
  const auto warmup = static_cast<std::size_t>(std::floor(config.warmup_fraction * static_cast<double>(total_steps)));
  const double s = static_cast<double>(step);
  if (step < warmup) return config.learning_rate * (s + 1) / static_cast<double>(warmup);
  const double remaining = static_cast<double>(total_steps - warmup);
  return config.learning_rate * std::max(0.0, (static_cast<double>(total_steps) - s) / remaining);
}

StepRecord training_step(std::span<const TrainItem* const> batch, ModelParams& params, AdamOptimizer& optimizer,
                         const TrainConfig& config, const StepContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = ctx.step;
  rec.epoch = ctx.epoch;
  rec.active = select_active_losses(ctx.step, config.scheme, config.m_interval, ctx.phase1_steps);
  rec.learning_rate = learning_rate_at(ctx.step, ctx.total_steps, config);

  ModelParams grads = params.zeros_like();
  const auto o = compute_batch_gradients(batch, params, config, rec.active, grads);
  rec.span_loss = o.span_loss;
  rec.spancl_loss = o.spancl_loss;
  rec.bce_loss = o.bce_loss;
  rec.combined = o.combined;
  rec.margin = o.margin;
  rec.items = o.contributing;
  rec.degenerate = o.degenerate;
  rec.clamped = o.clamped;
  if (!std::isfinite(o.combined) || !std::isfinite(o.margin) || !grads.all_finite()) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    throw TrainingAborted("non-finite loss at step " + std::to_string(ctx.step) + ": " + rec.to_json().dump(), rec);
  }
  if (o.contributing > 0) optimizer.step(params, grads, rec.learning_rate);
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

double mean_margin(const ModelParams& params, const TrainingData& data, std::size_t max_triples) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& item : data.items) {
    if (n >= max_triples) break;
    const auto* t = std::get_if<TripleFeatures>(&item);
    if (t == nullptr) continue;
    const auto org = encode(t->org, params.encoder, params.config);
    const auto pos = encode(t->pos, params.encoder, params.config);
    const auto neg = encode(t->neg, params.encoder, params.config);
    const Vec zo = span_representation(org.H, t->span_org.start, t->span_org.end, org.valid_len);
    const Vec zp = span_representation(pos.H, t->span_pos.start, t->span_pos.end, pos.valid_len);
    const Vec zn = span_representation(neg.H, t->span_neg.start, t->span_neg.end, neg.valid_len);
    try {
      sum += cosine_similarity(zo, zp) - cosine_similarity(zo, zn);
      ++n;
    } catch (const DegenerateRepresentation&) {
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Loop

TrainResult train(const TrainingData& data, const EvalFeatures* dev_features, const Corpus* dev,
                  const TrainConfig& config, ModelParams initial, const EpochCallback& on_epoch) {
  config.validate();
  if (data.triple_count == 0) throw ConfigError("no usable contrastive triples to train on");

  TrainResult result;
  result.best = initial;
  result.last = std::move(initial);

  auto summarize = [&](int epoch, const ModelParams& params) {
    EpochSummary s;
    s.epoch = epoch;
    s.mean_margin = mean_margin(params, data, config.margin_probe);
    if (dev_features != nullptr && dev != nullptr) s.report = evaluate(predict(params, *dev_features, config.decode), *dev);
    return s;
  };

  if (config.epochs == 0) return result;

  result.epochs.push_back(summarize(0, result.last));
  if (on_epoch) on_epoch(result.epochs.back());
  double best_em = result.epochs.back().report ? result.epochs.back().report->exact : 0.0;

  const std::size_t n = data.items.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
  const std::size_t phase1 =
      steps_per_epoch * static_cast<std::size_t>(std::min(config.pretrain_epochs, config.epochs));

  AdamOptimizer optimizer(result.last, config.adam_beta1, config.adam_beta2, config.adam_eps);
  std::mt19937_64 rng(derive_seed(config.seed, "training.shuffle"));
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    std::vector<const TrainItem*> batch;
    for (std::size_t b = 0; b < n; b += bs) {
      batch.clear();
      for (std::size_t k = b; k < std::min(n, b + bs); ++k) batch.push_back(&data.items[order[k]]);
      result.log.steps.push_back(
          training_step(batch, result.last, optimizer, config, StepContext{step, total_steps, phase1, epoch}));
      ++step;
    }
    result.epochs.push_back(summarize(epoch, result.last));
    if (on_epoch) on_epoch(result.epochs.back());
    const double em = result.epochs.back().report ? result.epochs.back().report->exact : 0.0;
    if (em > best_em || (dev == nullptr && epoch == config.epochs)) {
      best_em = em;
      result.best = result.last;
      result.best_epoch = epoch;
    }
  }
  return result;
}

TrainingRun run_training(const Corpus& train_corpus, const std::vector<ContrastiveTriple>& triples,
                         const Corpus* dev, TrainConfig config, const EpochCallback& on_epoch) {
  TrainingRun run;
  run.vocab = build_vocabulary(train_corpus, triples);
  config.encoder.vocab_size = static_cast<int>(run.vocab.size());
  config.encoder.max_seq_len = config.window.max_seq_len;
  config.validate();
  run.data = prepare_training_data(train_corpus, triples, run.vocab, config.window);
  std::optional<EvalFeatures> dev_features;
  if (dev != nullptr) dev_features = prepare_eval_features(*dev, run.vocab, config.window);
  auto initial = ModelParams::init(config.encoder, derive_seed(config.seed, "model"));
  run.result = train(run.data, dev_features ? &*dev_features : nullptr, dev, config, std::move(initial), on_epoch);
  return run;
}

}  // namespace spancl
