// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spancl/augment.hpp"
#include "spancl/common.hpp"
#include "spancl/contrastive.hpp"
#include "spancl/corpus.hpp"
#include "spancl/evaluation.hpp"
#include "spancl/inference.hpp"
#include "spancl/model.hpp"
#include "spancl/spanhead.hpp"
#include "spancl/synth.hpp"
#include "spancl/training.hpp"

using namespace spancl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fixture(const std::string& name) { return std::string(SPANCL_FIXTURES) + "/" + name; }

// ---------------------------------------------------------------------------
// 1

DecodedSpan enumerate_spans(const std::vector<double>& s, const std::vector<double>& e, PassageRange r, int max_len,
                            double delta) {
  DecodedSpan out;
  out.null_score = s[0] + e[0];
  double best = -std::numeric_limits<double>::infinity();
  TokenSpan arg{};
  for (int i = r.begin; i < r.end; ++i) {
    for (int j = i; j < r.end && j - i + 1 <= max_len; ++j) {
      const double v = s[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(j)];
      if (v > best) {
        best = v;
        arg = {i, j};
      }
    }
  }
  if (r.end > r.begin && out.null_score + delta < best) {
    out.span = arg;
    out.score = best;
  } else {
    out.score = out.null_score;
  }
  return out;
}

Outcome decode_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4, 4);
  const int trials = 1000;
  int agree = 0;
  for (int t = 0; t < trials; ++t) {
    const int l = 2 + static_cast<int>(rng() % 31);
    std::vector<double> s(static_cast<std::size_t>(l)), e(s.size());
    for (auto& v : s) v = (rng() % 5 == 0) ? std::round(u(rng)) : u(rng);
    for (auto& v : e) v = (rng() % 5 == 0) ? std::round(u(rng)) : u(rng);
    const int begin = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(l - 1));
    const PassageRange r{begin, l};
    const int max_len = 1 + static_cast<int>(rng() % 12);
    const double delta = (rng() % 3 == 0) ? u(rng) : 0.0;
    const auto got = decode_answer(s, e, r, {max_len, delta});
    const auto want = enumerate_spans(s, e, r, max_len, delta);
    if (got.span == want.span && got.score == want.score) ++agree;
  }
  o.require(agree == trials, std::to_string(trials - agree) + " disagreements");
  o.detail = std::to_string(agree) + "/" + std::to_string(trials) + " trials agree" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ---------------------------------------------------------------------------
// 2

EncoderConfig grad_config() {
  EncoderConfig c;
  c.vocab_size = 20;
  c.max_seq_len = 12;
  c.hidden = 8;
  c.layers = 2;
  c.heads = 2;
  c.ff_mult = 2;
  c.init_std = 0.4;
  return c;
}

FeatureWindow random_window(std::mt19937_64& rng, int q_len) {
  FeatureWindow w;
  w.input_ids.push_back(Vocabulary::kCls);
  for (int i = 0; i < q_len; ++i) w.input_ids.push_back(4 + static_cast<int>(rng() % 16));
  w.input_ids.push_back(Vocabulary::kSep);
  w.passage_token_offset = static_cast<int>(w.input_ids.size());
  while (w.input_ids.size() < 11) w.input_ids.push_back(4 + static_cast<int>(rng() % 16));
  w.input_ids.push_back(Vocabulary::kSep);
  w.valid_len = 12;
  w.window_len = 11 - w.passage_token_offset;
  return w;
}

TripleFeatures random_triple(std::mt19937_64& rng) {
  TripleFeatures t;
  t.question_id = "q";
  t.org = random_window(rng, 3);
  t.pos = random_window(rng, 4);
  t.neg = random_window(rng, 3);
  t.span_org = {t.org.passage_token_offset + 1, t.org.passage_token_offset + 2};
  t.span_pos = {t.pos.passage_token_offset + 1, t.pos.passage_token_offset + 3};
  t.span_neg = {t.neg.passage_token_offset, t.neg.passage_token_offset + 1};
  t.org.label = t.span_org;
  t.pos.label = t.span_pos;
  t.neg.label = {0, 0};
  return t;
}

ModelParams grad_model(std::uint64_t seed) {
  auto p = ModelParams::init(grad_config(), seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& [name, m] : p.tensors()) {
    if (name.find("answerability") != std::string::npos || name.find("bias") != std::string::npos ||
        name.find(".b") != std::string::npos) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += n(rng);
    }
  }
  return p;
}

Outcome gradient_checks() {
  Outcome o;
  struct Case {
    const char* name;
    LossWeights weights;
    ActiveLosses active;
    RepresentationMode mode;
  };
  const std::vector<Case> cases{
      {"span", {1.0, 0.0, 0.05}, {true, false}, RepresentationMode::Span},
      {"spanCL", {0.0, 1.0, 0.5}, {false, true}, RepresentationMode::Span},
      {"combined", {0.5, 0.5, 0.5}, {true, true}, RepresentationMode::Span},
      {"cls+bce", {0.5, 0.5, 0.5}, {true, true}, RepresentationMode::Cls},
  };
  std::ostringstream worst;
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    std::mt19937_64 rng(seed);
    std::vector<TrainItem> items{random_triple(rng)};
    PlainFeatures plain;
    plain.question_id = "plain";
    plain.window = random_window(rng, 3);
    plain.window.label = {plain.window.passage_token_offset + 2, plain.window.passage_token_offset + 2};
    items.push_back(plain);
    std::vector<const TrainItem*> batch;
    for (const auto& it : items) batch.push_back(&it);
    TrainConfig config;
    config.weights = c.weights;
    config.rep_mode = c.mode;
    const LossAndGrad fn = [&](const ModelParams& p, ModelParams& g) {
      return compute_batch_gradients(batch, p, config, c.active, g).combined;
    };
    GradCheckOptions opts;
    opts.step = 1e-5;
    opts.coordinates = 1500;
    const auto r = finite_difference_check(fn, grad_model(seed++), opts);
    worst << c.name << " " << r.max_rel_error << " (" << r.checked << " coords) ";
    o.require(r.max_rel_error <= 1e-4, std::string(c.name) + " exceeds 1e-4 at " + r.worst_coordinate);
  }
  o.detail = worst.str() + o.detail;
  return o;
}

// ---------------------------------------------------------------------------
// 3

Outcome loss_fixed_points() {
  Outcome o;
  const double ln2 = std::log(2.0);
  Vec a(4), b(4);
  a << 0.3, -1.2, 0.7, 2.0;
  b << -0.5, 0.4, 1.1, -0.9;
  double worst = 0;
  for (double tau : {0.02, 0.05, 1.0}) {
    const double v = spancl_loss(a, b, b, tau).value;
    worst = std::max(worst, std::abs(v - ln2));
  }
  const auto sl = span_loss({{0.5, 0.5}, {0.5, 0.5}}, {1, 0}).value;
  const double cl = combined_loss(2 * ln2, ln2, {0.5, 0.5, 0.05});
  worst = std::max({worst, std::abs(sl - 2 * ln2), std::abs(cl - 1.5 * ln2)});
  o.require(worst <= 1e-9, "deviation above 1e-9");
  std::ostringstream d;
  d << "max deviation " << worst;
  o.detail = d.str() + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ---------------------------------------------------------------------------
// 4

bool near(double a, double b) { return std::abs(a - b) <= 1e-9; }

// Reports carry percentages to 2 decimals.
double pct2(double x) { return std::round(x * 100.0) / 100.0; }

Outcome metric_fixture() {
  Outcome o;
  const auto dev = load_squad(fixture("eval_dev.json"));
  const auto r = evaluate(load_predictions(fixture("eval_predictions.json")), dev);
  // q1 "in 2005" vs "2005": EM 0, F1 2/3; q2, q3, q4 exact; q5 answers a NoAns; q6 empty on a HasAns
  const double f1 = 100.0 * (2.0 / 3.0 + 3.0) / 6.0;
  o.require(near(r.exact, 50.0) && near(r.f1, pct2(f1)), "overall EM/F1");
  o.require(near(r.has_ans_exact, 50.0) && near(r.has_ans_f1, pct2(100.0 * (2.0 / 3.0 + 2.0) / 4.0)), "HasAns");
  o.require(near(r.no_ans_exact, 50.0) && near(r.no_ans_f1, 50.0), "NoAns");
  o.require(near(f1_score("in 2005", {"2005"}), 2.0 / 3.0), "in 2005 vs 2005");
  o.require(exact_match("", {}) == 1 && exact_match("2005", {}) == 0 && f1_score("", {"2005"}) == 0.0,
            "empty/unanswerable cases");
  const auto perfect = evaluate(load_predictions(fixture("eval_perfect.json")), dev);
  o.require(perfect.exact == 100.0 && perfect.f1 == 100.0, "perfect predictions");
  std::ostringstream d;
  d << "EM " << r.exact << " F1 " << r.f1 << " HasAns " << r.has_ans_exact << "/" << r.has_ans_f1 << " NoAns "
    << r.no_ans_exact << "/" << r.no_ans_f1;
  o.detail = d.str() + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ---------------------------------------------------------------------------
// 5

Outcome augmentation_fixture() {
  Outcome o;
  const auto lex = AugmentLexicons::load(fixture("lexicons.json"));
  const LexiconAnnotator ann(lex);
  std::mt19937_64 rng(0);
  o.require(negate(ann.annotate("What was Beyonce's role in Destiny's Child?"), lex) ==
                "What wasn't Beyonce's role in Destiny's Child?",
            "negation");
  o.require(entity_replace(ann.annotate("What native people lived in the San Diego area before the Europeans arrived?"),
                           lex, rng) == "What native people lived in the San Diego area before the Mexicans arrived?",
            "entity replacement");
  o.require(
      antonym_swap(ann.annotate("What part of Gothic buildings are often found terminated with enormous pinnacles?"),
                   lex, rng) == "What part of Gothic buildings are often found terminated with small pinnacles?",
      "antonym swap");
  o.require(select_paraphrase("a b c", {"a b c", "x y c", "a b d"}) == "x y c", "max edit distance");
  o.require(select_paraphrase("a b c", {"x y c", "a y z", "p q c"}) == "x y c", "tie goes to the earliest");
  o.require(!select_paraphrase("a b c", {"a b c"}).has_value(), "identical candidates rejected");
  o.detail = o.pass ? "3 transformations verbatim, tie-breaking by earliest index" : o.detail;
  return o;
}

// ---------------------------------------------------------------------------
// 6

struct DeskRun {
  double margin_first = 0;
  double margin_last = 0;
  EvalReport final_report;
};

TrainConfig desk_config(std::uint64_t seed) {
  auto c = TrainConfig::toy_defaults();
  c.learning_rate = 1e-3;
  c.batch_size = 8;
  c.epochs = 5;
  c.seed = seed;
  c.encoder.hidden = 32;
  c.encoder.heads = 4;
  c.encoder.layers = 2;
  c.window = {64, 32, 24};
  return c;
}

DeskRun desk_run(const SynthCorpus& s, const std::vector<ContrastiveTriple>& triples, TrainConfig config) {
  const auto run = run_training(s.train, triples, &s.dev, config);
  DeskRun r;
  r.margin_first = run.result.epochs.front().mean_margin;
  r.margin_last = run.result.epochs.back().mean_margin;
  r.final_report = *run.result.epochs.back().report;
  return r;
}

Outcome desk_scale() {
  Outcome o;
  const auto t0 = Clock::now();
  int margin_up = 0;
  int noans_ok = 0;
  std::ostringstream rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = generate_synthetic({500, 200, 3, seed});
    const LexiconAnnotator ann(s.lexicons);
    OfflineTranslator offline(s.lexicons, derive_seed(seed, "augment.offline"));
    const Augmenter aug{&s.lexicons, &ann, &offline, &offline, derive_seed(seed, "augment")};
    const auto triples = build_triples(s.train, aug, {}).triples;

    const auto cl = desk_run(s, triples, desk_config(seed));
    auto base_cfg = desk_config(seed);
    base_cfg.weights.lambda2 = 0.0;
    const auto base = desk_run(s, triples, base_cfg);

    const bool up = cl.margin_last > cl.margin_first;
    const bool noans = cl.final_report.no_ans_exact >= base.final_report.no_ans_exact;
    margin_up += up;
    noans_ok += noans;
    char line[256];
    std::snprintf(line, sizeof line,
                  "    seed %llu: margin %+.4f -> %+.4f | NoAns spanCL %.2f vs base %.2f | EM %.2f vs %.2f | "
                  "HasAns %.2f vs %.2f\n",
                  static_cast<unsigned long long>(seed), cl.margin_first, cl.margin_last,
                  cl.final_report.no_ans_exact, base.final_report.no_ans_exact, cl.final_report.exact,
                  base.final_report.exact, cl.final_report.has_ans_exact, base.final_report.has_ans_exact);
    rows << line;
  }
  const double secs = seconds_since(t0);
  o.require(margin_up == 5, "margin rose in " + std::to_string(margin_up) + "/5 seeds");
  o.require(noans_ok >= 4, "NoAns >= baseline in " + std::to_string(noans_ok) + "/5 seeds");
  o.require(secs <= 600, "took longer than 10 min");
  std::ostringstream d;
  d << "(a) margin up " << margin_up << "/5, (b) NoAns >= baseline " << noans_ok << "/5, " << static_cast<int>(secs)
    << " s" << (o.detail.empty() ? "" : "; " + o.detail) << "\n"
    << rows.str();
  o.detail = d.str();
  if (!o.detail.empty() && o.detail.back() == '\n') o.detail.pop_back();
  return o;
}

// ---------------------------------------------------------------------------
// 7, 8

struct SmallSetup {
  SynthCorpus synth;
  std::vector<ContrastiveTriple> triples;
};

SmallSetup small_setup(std::size_t passages) {
  SmallSetup s;
  s.synth = generate_synthetic({passages, 20, 3, 9});
  const LexiconAnnotator ann(s.synth.lexicons);
  OfflineTranslator offline(s.synth.lexicons, 9);
  const Augmenter aug{&s.synth.lexicons, &ann, &offline, &offline, 9};
  s.triples = build_triples(s.synth.train, aug, {}).triples;
  return s;
}

TrainConfig small_config() {
  auto c = TrainConfig::toy_defaults();
  c.encoder.hidden = 16;
  c.encoder.heads = 2;
  c.encoder.layers = 2;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.window = {64, 32, 24};
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  Outcome o;
  const auto s = small_setup(40);
  auto c = small_config();
  c.epochs = 1;  // 40 triples / batch 4 = 10 steps
  const auto dir = fs::temp_directory_path() / "spancl_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> traces, files;
  for (int run = 0; run < 2; ++run) {
    const auto r = run_training(s.synth.train, s.triples, &s.synth.dev, c);
    std::string trace;
    for (const auto& rec : r.result.log.steps) trace += rec.to_json(false).dump() + "\n";
    o.require(r.result.log.steps.size() == 10, "expected 10 steps");
    traces.push_back(trace);
    const auto feats = prepare_eval_features(s.synth.dev, r.vocab, c.window);
    const auto path = dir / ("preds_" + std::to_string(run) + ".json");
    save_predictions(predict(r.result.last, feats, c.decode), path.string());
    files.push_back(read_file(path));
  }
  o.require(traces[0] == traces[1], "loss traces differ");
  o.require(files[0] == files[1] && !files[0].empty(), "prediction files differ");
  fs::remove_all(dir);
  if (o.pass) o.detail = "10-step traces and prediction files byte-identical";
  return o;
}

Outcome scheme_plumbing() {
  Outcome o;
  const auto s = small_setup(32);
  auto c = small_config();
  c.epochs = 3;
  c.batch_size = 8;  // 4 steps per epoch

  c.scheme = Scheme::Alternate;
  c.m_interval = 2;
  const auto alt = run_training(s.synth.train, s.triples, nullptr, c).result.log;
  std::string pattern;
  for (const auto& r : alt.steps) {
    const bool want_cl = r.step % 3 == 2;
    o.require(r.active == ActiveLosses{!want_cl, want_cl}, "alternate step " + std::to_string(r.step));
    pattern += r.active.spancl ? "C" : "S";
  }

  c.scheme = Scheme::PretrainFinetune;
  c.pretrain_epochs = 1;
  const auto pf = run_training(s.synth.train, s.triples, nullptr, c).result.log;
  for (const auto& r : pf.steps) {
    const bool phase1 = r.step < 4;
    o.require(phase1 == (r.epoch == 1), "phase boundary not at the epoch edge");
    o.require(r.active == ActiveLosses{!phase1, phase1}, "pretrain_finetune step " + std::to_string(r.step));
    o.require(phase1 ? r.span_loss == 0 && r.spancl_loss > 0 : r.spancl_loss == 0, "logged losses mismatch phase");
  }

  c.scheme = Scheme::Joint;
  const auto joint = run_training(s.synth.train, s.triples, nullptr, c).result.log;
  for (const auto& r : joint.steps) {
    o.require(r.active == ActiveLosses{true, true} && r.span_loss > 0 && r.spancl_loss > 0,
              "joint step " + std::to_string(r.step));
  }
  o.require(alt.steps.size() == 12 && pf.steps.size() == 12 && joint.steps.size() == 12, "step counts");
  if (o.pass) o.detail = "alternate " + pattern + ", pretrain_finetune switches at step 4, joint both every step";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria{
      {1, "decode oracle", decode_oracle, 5},
      {2, "gradient checks", gradient_checks, 60},
      {3, "loss fixed points", loss_fixed_points, 0},
      {4, "metric fixture", metric_fixture, 1},
      {5, "augmentation fixtures", augmentation_fixture, 0},
      {6, "desk-scale effect", desk_scale, 0},
      {7, "determinism", determinism, 0},
      {8, "scheme plumbing", scheme_plumbing, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget";
    }
    failures += !o.pass;
    char t[32];
    std::snprintf(t, sizeof t, "%.2f s", secs);
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << t
              << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
