#include "spancl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spancl/augment.hpp"
#include "spancl/common.hpp"
#include "spancl/corpus.hpp"
#include "spancl/evaluation.hpp"
#include "spancl/inference.hpp"
#include "spancl/model.hpp"
#include "spancl/synth.hpp"
#include "spancl/training.hpp"

namespace spancl {

namespace fs = std::filesystem;

namespace {

/// Flags shared by train and sweep-tau. Each value starts at the toy
/// default so --help shows it; only flags given on the command line
/// override the preset and the config file.
struct TrainOptions {
  std::string preset = "toy";
  std::string config_path;
  TrainConfig values = TrainConfig::toy_defaults();
  std::string scheme = "joint";
  std::string rep_mode = "span";
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> appliers;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Base settings: toy (desk scale) or full (full-size windows and schedule)")
        ->check(CLI::IsMember({"toy", "full"}))
        ->capture_default_str();
    app->add_option("--config", config_path, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
    auto& v = values;
    bind(app, "--lr", v.learning_rate, "Peak learning rate", [&v](TrainConfig& c) { c.learning_rate = v.learning_rate; });
    bind(app, "--batch-size", v.batch_size, "Items per step", [&v](TrainConfig& c) { c.batch_size = v.batch_size; });
    bind(app, "--epochs", v.epochs, "Training epochs", [&v](TrainConfig& c) { c.epochs = v.epochs; });
    bind(app, "--warmup", v.warmup_fraction, "Warmup fraction of total steps",
         [&v](TrainConfig& c) { c.warmup_fraction = v.warmup_fraction; });
    auto* s = app->add_option("--scheme", scheme, "joint, alternate or pretrain_finetune")
                  ->check(CLI::IsMember({"joint", "alternate", "pretrain_finetune"}))
                  ->capture_default_str();
    appliers.emplace_back(s, [this](TrainConfig& c) { c.scheme = scheme_from_string(scheme); });
    bind(app, "--m-interval", v.m_interval, "Span-only steps between spanCL steps (alternate)",
         [&v](TrainConfig& c) { c.m_interval = v.m_interval; });
    bind(app, "--pretrain-epochs", v.pretrain_epochs, "spanCL-only epochs (pretrain_finetune)",
         [&v](TrainConfig& c) { c.pretrain_epochs = v.pretrain_epochs; });
    bind(app, "--seed", v.seed, "Master seed", [&v](TrainConfig& c) { c.seed = v.seed; });
    bind(app, "--lambda1", v.weights.lambda1, "Span loss weight",
         [&v](TrainConfig& c) { c.weights.lambda1 = v.weights.lambda1; });
    bind(app, "--lambda2", v.weights.lambda2, "spanCL loss weight",
         [&v](TrainConfig& c) { c.weights.lambda2 = v.weights.lambda2; });
    bind(app, "--tau", v.weights.tau, "Contrastive temperature", [&v](TrainConfig& c) { c.weights.tau = v.weights.tau; });
    auto* r = app->add_option("--rep-mode", rep_mode, "Contrastive representation: span, cls or both")
                  ->check(CLI::IsMember({"span", "cls", "both"}))
                  ->capture_default_str();
    appliers.emplace_back(r, [this](TrainConfig& c) { c.rep_mode = representation_mode_from_string(rep_mode); });
    auto* ib = app->add_flag("--in-batch-negatives", v.in_batch_negatives,
                             "Also contrast against the other negatives of the batch");
    appliers.emplace_back(ib, [&v](TrainConfig& c) { c.in_batch_negatives = v.in_batch_negatives; });
    bind(app, "--hidden", v.encoder.hidden, "Encoder width", [&v](TrainConfig& c) { c.encoder.hidden = v.encoder.hidden; });
    bind(app, "--layers", v.encoder.layers, "Encoder layers", [&v](TrainConfig& c) { c.encoder.layers = v.encoder.layers; });
    bind(app, "--heads", v.encoder.heads, "Attention heads", [&v](TrainConfig& c) { c.encoder.heads = v.encoder.heads; });
    bind(app, "--ff-mult", v.encoder.ff_mult, "Feed-forward width multiplier",
         [&v](TrainConfig& c) { c.encoder.ff_mult = v.encoder.ff_mult; });
    bind(app, "--init-std", v.encoder.init_std, "Weight init standard deviation",
         [&v](TrainConfig& c) { c.encoder.init_std = v.encoder.init_std; });
    bind(app, "--max-seq-len", v.window.max_seq_len, "Window length in tokens",
         [&v](TrainConfig& c) { c.window.max_seq_len = v.window.max_seq_len; });
    bind(app, "--doc-stride", v.window.doc_stride, "Passage token step between windows",
         [&v](TrainConfig& c) { c.window.doc_stride = v.window.doc_stride; });
    bind(app, "--max-query-len", v.window.max_query_len, "Question truncation length",
         [&v](TrainConfig& c) { c.window.max_query_len = v.window.max_query_len; });
    bind(app, "--max-answer-len", v.decode.max_answer_len, "Longest decoded answer in tokens",
         [&v](TrainConfig& c) { c.decode.max_answer_len = v.decode.max_answer_len; });
    bind(app, "--null-threshold", v.decode.null_threshold, "Null-score margin for NO_ANSWER",
         [&v](TrainConfig& c) { c.decode.null_threshold = v.decode.null_threshold; });
    bind(app, "--margin-probe", v.margin_probe, "Triples used for the per-epoch margin",
         [&v](TrainConfig& c) { c.margin_probe = v.margin_probe; });
  }

  template <typename T>
  void bind(CLI::App* app, const std::string& name, T& var, const std::string& desc,
            std::function<void(TrainConfig&)> apply) {
    appliers.emplace_back(app->add_option(name, var, desc)->capture_default_str(), std::move(apply));
  }

  TrainConfig resolve() const {
    TrainConfig c = preset == "full" ? TrainConfig::full_defaults() : TrainConfig::toy_defaults();
    if (!config_path.empty()) {
      try {
        c.merge_json(nlohmann::json::parse(read_file(config_path)));
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(config_path + ": " + e.what(), e.byte);
      }
    }
    for (const auto& [opt, apply] : appliers) {
      if (opt->count() > 0) apply(c);
    }
    c.encoder.max_seq_len = c.window.max_seq_len;
    c.validate();
    return c;
  }
};

std::string fixed2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

std::string epoch_line(const EpochSummary& s) {
  std::string line = "epoch " + std::to_string(s.epoch) + "  margin " + std::to_string(s.mean_margin);
  if (s.report) {
    line += "  EM " + fixed2(s.report->exact) + "  F1 " + fixed2(s.report->f1) + "  HasAns " +
            fixed2(s.report->has_ans_exact) + "  NoAns " + fixed2(s.report->no_ans_exact);
  }
  return line;
}

nlohmann::json epochs_json(const TrainResult& r) {
  auto arr = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json j{{"epoch", e.epoch}, {"mean_margin", e.mean_margin}};
    if (e.report) j["report"] = e.report->to_json();
    arr.push_back(j);
  }
  return {{"best_epoch", r.best_epoch}, {"epochs", arr}};
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path.string(), j.dump(2) + "\n"); }

void save_run(const TrainingRun& run, const TrainConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  const nlohmann::json meta{{"train_config", config.to_json()}, {"best_epoch", run.result.best_epoch}};
  save_checkpoint(run.result.best, run.vocab.hash(), meta, (dir / "model.ckpt").string());
  run.vocab.save((dir / "vocab.txt").string());
  run.result.log.save_jsonl((dir / "train_log.jsonl").string());
  write_json(dir / "epochs.json", epochs_json(run.result));
  write_json(dir / "config.json", config.to_json());
}

// ---------------------------------------------------------------------------

int run_synth(std::ostream& out, const std::string& out_dir, const SynthConfig& config) {
  const auto s = generate_synthetic(config);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  save_squad(s.train, (dir / "train.json").string());
  save_squad(s.dev, (dir / "dev.json").string());
  write_json(dir / "lexicons.json", s.lexicons.to_json());
  out << "train: " << s.train.examples().size() << " questions, dev: " << s.dev.examples().size() << " questions ("
      << s.dev.unanswerable_count() << " unanswerable)\n";
  return kExitOk;
}

struct AugmentArgs {
  std::string corpus, out, lexicons, external, translator_url, stats;
  std::uint64_t seed = 42;
};

int run_augment(std::ostream& out, std::ostream& err, const AugmentArgs& a) {
  const auto corpus = load_squad(a.corpus);
  const auto lexicons = a.lexicons.empty() ? AugmentLexicons::defaults() : AugmentLexicons::load(a.lexicons);
  const LexiconAnnotator annotator(lexicons);
  OfflineTranslator offline(lexicons, derive_seed(a.seed, "augment.offline"));
  std::unique_ptr<HttpTranslator> remote;
  if (!a.translator_url.empty()) remote = std::make_unique<HttpTranslator>(a.translator_url);
  Augmenter aug{&lexicons, &annotator, remote ? static_cast<TranslatorClient*>(remote.get()) : &offline, &offline,
                derive_seed(a.seed, "augment")};
  std::map<std::string, std::string> external;
  if (!a.external.empty()) external = load_external_negatives(a.external);
  const auto result = build_triples(corpus, aug, pair_dataset_negatives(corpus), a.external.empty() ? nullptr : &external);
  save_triples_jsonl(result.triples, a.out);
  const auto stats = result.stats.to_json();
  if (!a.stats.empty()) write_json(a.stats, stats);
  if (result.stats.translator_fallbacks > 0) {
    err << "warning: translator unavailable for " << result.stats.translator_fallbacks
        << " questions; used the offline paraphraser\n";
  }
  out << stats.dump(2) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string corpus, triples, dev, out_dir;
};

int run_train(std::ostream& out, const TrainArgs& a, const TrainOptions& opts) {
  const auto config = opts.resolve();
  const auto corpus = load_squad(a.corpus);
  const auto triples = load_triples_jsonl(a.triples);
  std::optional<Corpus> dev;
  if (!a.dev.empty()) dev = load_squad(a.dev);
  const auto run = run_training(corpus, triples, dev ? &*dev : nullptr, config,
                                [&](const EpochSummary& s) { out << epoch_line(s) << "\n" << std::flush; });
  if (run.data.unusable_triples > 0) {
    out << "skipped " << run.data.unusable_triples << " triples without a window holding the gold span\n";
  }
  save_run(run, config, a.out_dir);
  out << "best epoch " << run.result.best_epoch << "; wrote " << (fs::path(a.out_dir) / "model.ckpt").string() << "\n";
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint, vocab, data, out;
  std::optional<double> null_threshold;
  std::optional<int> max_answer_len;
};

int run_predict(std::ostream& out, const PredictArgs& a) {
  const auto ck = load_checkpoint(a.checkpoint);
  const std::string vocab_path =
      a.vocab.empty() ? (fs::path(a.checkpoint).parent_path() / "vocab.txt").string() : a.vocab;
  const auto vocab = Vocabulary::load(vocab_path);
  if (vocab.hash() != ck.vocab_hash) throw ValidationError("vocabulary " + vocab_path + " does not match the checkpoint");
  TrainConfig config = TrainConfig::toy_defaults();
  if (ck.metadata.contains("train_config")) config.merge_json(ck.metadata.at("train_config"));
  if (a.null_threshold) config.decode.null_threshold = *a.null_threshold;
  if (a.max_answer_len) config.decode.max_answer_len = *a.max_answer_len;
  const auto corpus = load_squad(a.data);
  const auto features = prepare_eval_features(corpus, vocab, config.window);
  const auto preds = predict(ck.params, features, config.decode);
  save_predictions(preds, a.out);
  out << "wrote " << preds.size() << " predictions to " << a.out << "\n";
  return kExitOk;
}

int run_evaluate(std::ostream& out, const std::string& data, const std::string& predictions, const std::string& report) {
  const auto corpus = load_squad(data);
  const auto preds = load_predictions(predictions);
  const auto r = evaluate(preds, corpus);
  if (!report.empty()) write_json(report, r.to_json());
  out << r.to_json().dump(2) << "\n";
  return kExitOk;
}

int run_sweep(std::ostream& out, const TrainArgs& a, const TrainOptions& opts, const std::vector<double>& taus) {
  const auto base = opts.resolve();
  const auto corpus = load_squad(a.corpus);
  const auto triples = load_triples_jsonl(a.triples);
  const auto dev = load_squad(a.dev);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::string table = "tau\tEM\tF1\tHasAns_EM\tNoAns_EM\n";
  auto summary = nlohmann::json::array();
  for (double tau : taus) {
    TrainConfig config = base;
    config.weights.tau = tau;
    config.validate();
    const auto run = run_training(corpus, triples, &dev, config);
    std::ostringstream name;
    name << "tau_" << tau;
    const fs::path sub = dir / name.str();
    save_run(run, config, sub);
    const auto features = prepare_eval_features(dev, run.vocab, config.window);
    const auto report = evaluate(predict(run.result.best, features, config.decode), dev);
    write_json(sub / "report.json", report.to_json());
    std::ostringstream row;
    row << tau << "\t" << fixed2(report.exact) << "\t" << fixed2(report.f1) << "\t" << fixed2(report.has_ans_exact)
        << "\t" << fixed2(report.no_ans_exact) << "\n";
    table += row.str();
    out << row.str() << std::flush;
    summary.push_back({{"tau", tau}, {"report", report.to_json()}});
  }
  write_file((dir / "sweep.tsv").string(), table);
  write_json(dir / "sweep.json", summary);
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Span-level contrastive learning for reading comprehension with unanswerable questions", "spancl"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthConfig synth;
  std::string synth_dir;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the templated toy corpus and its lexicons");
  synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--train-passages", synth.train_passages, "Training passages")->capture_default_str();
  synth_cmd->add_option("--dev-passages", synth.dev_passages, "Dev passages")->capture_default_str();
  synth_cmd->add_option("--sentences", synth.sentences_per_passage, "Sentences per passage")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();

  AugmentArgs aug;
  if (const char* url = std::getenv("SPANCL_TRANSLATOR_URL")) aug.translator_url = url;
  auto* aug_cmd = app.add_subcommand("augment", "Build contrastive triples from a SQuAD 2.0 file");
  aug_cmd->add_option("--data", aug.corpus, "SQuAD 2.0 training file")->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--out", aug.out, "Triples JSONL output")->required();
  aug_cmd->add_option("--lexicons", aug.lexicons, "Lexicon JSON (built-in English defaults otherwise)")
      ->check(CLI::ExistingFile);
  aug_cmd->add_option("--external-negatives", aug.external, "JSONL of {question_id, q_neg}")->check(CLI::ExistingFile);
  aug_cmd->add_option("--translator-url", aug.translator_url,
                      "Back-translation endpoint (default: SPANCL_TRANSLATOR_URL, else offline)")
      ->capture_default_str();
  aug_cmd->add_option("--stats", aug.stats, "Write per-strategy counts JSON here");
  aug_cmd->add_option("--seed", aug.seed, "Seed")->capture_default_str();

  TrainArgs train_args;
  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a model and save the best-EM checkpoint");
  train_cmd->add_option("--data", train_args.corpus, "SQuAD 2.0 training file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--triples", train_args.triples, "Triples JSONL from augment")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", train_args.dev, "SQuAD 2.0 dev file for per-epoch evaluation")->check(CLI::ExistingFile);
  train_cmd->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  train_opts.attach(train_cmd);

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Decode answers with a checkpoint");
  pred_cmd->add_option("--checkpoint", pred.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--vocab", pred.vocab, "Vocabulary file (default: vocab.txt next to the checkpoint)");
  pred_cmd->add_option("--data", pred.data, "SQuAD 2.0 file to answer")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred.out, "Predictions JSON output")->required();
  pred_cmd->add_option("--null-threshold", pred.null_threshold, "Override the trained null threshold");
  pred_cmd->add_option("--max-answer-len", pred.max_answer_len, "Override the trained answer length limit");

  std::string eval_data, eval_preds, eval_report;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions with EM/F1");
  eval_cmd->add_option("--data", eval_data, "SQuAD 2.0 file with gold answers")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", eval_preds, "Predictions JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_report, "Write the report JSON here");

  TrainArgs sweep_args;
  TrainOptions sweep_opts;
  std::vector<double> taus{0.01, 0.02, 0.05, 0.1, 0.3, 1.0};
  auto* sweep_cmd = app.add_subcommand("sweep-tau", "Train and evaluate across a temperature grid");
  sweep_cmd->add_option("--data", sweep_args.corpus, "SQuAD 2.0 training file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--triples", sweep_args.triples, "Triples JSONL")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--dev", sweep_args.dev, "SQuAD 2.0 dev file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out-dir", sweep_args.out_dir, "Output directory")->required();
  sweep_cmd->add_option("--taus", taus, "Temperature grid")->capture_default_str()->delimiter(',');
  sweep_opts.attach(sweep_cmd);

  std::vector<const char*> argv{"spancl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(out, synth_dir, synth);
    if (*aug_cmd) return run_augment(out, err, aug);
    if (*train_cmd) return run_train(out, train_args, train_opts);
    if (*pred_cmd) return run_predict(out, pred);
    if (*eval_cmd) return run_evaluate(out, eval_data, eval_preds, eval_report);
    if (*sweep_cmd) return run_sweep(out, sweep_args, sweep_opts, taus);
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace spancl
