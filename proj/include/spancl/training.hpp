#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spancl/common.hpp"
#include "spancl/contrastive.hpp"
#include "spancl/corpus.hpp"
#include "spancl/evaluation.hpp"
#include "spancl/inference.hpp"
#include "spancl/model.hpp"

namespace spancl {

enum class Scheme { Joint, Alternate, PretrainFinetune };

std::string to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);

struct ActiveLosses {
  bool span = true;
  bool spancl = true;
  bool operator==(const ActiveLosses&) const = default;
};

/// joint: both losses every step. alternate: after every M span-only steps
/// one spanCL-only step. pretrain_finetune: spanCL only for the first
/// `phase1_steps` steps, span only afterwards.
ActiveLosses select_active_losses(std::size_t step_index, Scheme scheme, int m_interval,
                                  std::size_t phase1_steps = 0);

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 16;
  int epochs = 5;
  double warmup_fraction = 0.1;
  Scheme scheme = Scheme::Joint;
  int m_interval = 2;
  int pretrain_epochs = 1;  // phase-1 length of pretrain_finetune
  std::uint64_t seed = 42;
  LossWeights weights;
  RepresentationMode rep_mode = RepresentationMode::Span;
  bool in_batch_negatives = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  EncoderConfig encoder;
  WindowConfig window{128, 64, 32};
  DecodeConfig decode;
  std::size_t margin_probe = 256;  // triples used for the per-epoch margin

  /// Desk-scale defaults (lr 3e-4, batch 16, 5 epochs).
  static TrainConfig toy_defaults();
  /// Full-scale values: lr 2e-5, batch 12, 2 epochs, warmup 0.1, windows 512/128/64.
  static TrainConfig full_defaults();

  void validate() const;
  nlohmann::json to_json() const;
  /// Fields absent from `j` keep their current value.
  void merge_json(const nlohmann::json& j);
};

/// One contrastive triple, each member windowed on its own; positions are
/// that member's sequence coordinates of the shared gold span.
struct TripleFeatures {
  std::string question_id;
  FeatureWindow org;  // labelled with the gold span
  FeatureWindow pos;  // labelled with the gold span (only used by spanCL)
  FeatureWindow neg;  // labelled (0,0)
  TokenSpan span_org;
  TokenSpan span_pos;
  TokenSpan span_neg;
};

/// A question outside every triple: plain span-loss supervision.
struct PlainFeatures {
  std::string question_id;
  FeatureWindow window;
  bool answerable = false;
};

using TrainItem = std::variant<TripleFeatures, PlainFeatures>;

struct TrainingData {
  std::vector<TrainItem> items;
  std::size_t triple_count = 0;
  std::size_t unusable_triples = 0;
  std::size_t plain_count = 0;
};

Vocabulary build_vocabulary(const Corpus& train, const std::vector<ContrastiveTriple>& triples,
                            std::size_t min_freq = 2);

/// A triple is usable only if every member has a window holding the whole
/// gold span; unusable ones are counted and dropped.
TrainingData prepare_training_data(const Corpus& train, const std::vector<ContrastiveTriple>& triples,
                                   const Vocabulary& vocab, const WindowConfig& window,
                                   bool include_plain = true);

struct StepRecord {
  std::size_t step = 0;
  int epoch = 0;
  ActiveLosses active;
  double span_loss = 0;
  double spancl_loss = 0;
  double bce_loss = 0;
  double combined = 0;
  double margin = 0;
  double learning_rate = 0;
  double wall_ms = 0;
  std::size_t items = 0;
  std::size_t degenerate = 0;
  bool clamped = false;

  nlohmann::json to_json(bool include_wall_time = true) const;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  void save_jsonl(const std::string& path, bool include_wall_time = true) const;
};

class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, StepRecord record) : Error(what), record_(std::move(record)) {}
  const StepRecord& record() const { return record_; }

 private:
  StepRecord record_;
};

struct BatchOutcome {
  double combined = 0;
  double span_loss = 0;
  double spancl_loss = 0;
  double bce_loss = 0;
  double margin = 0;
  std::size_t contributing = 0;
  std::size_t degenerate = 0;
  bool clamped = false;
};

/// Forward and backward over one batch; `grads` must be zeroed. The batch
/// loss is the mean of the contributing items' losses.
BatchOutcome compute_batch_gradients(std::span<const TrainItem* const> batch, const ModelParams& params,
                                     const TrainConfig& config, ActiveLosses active, ModelParams& grads);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& like, double beta1, double beta2, double eps);
  void step(ModelParams& params, const ModelParams& grads, double learning_rate);
  std::size_t steps_taken() const { return t_; }

 private:
  ModelParams m_;
  ModelParams v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Linear warmup over warmup_fraction of the steps, then linear decay to 0.
double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& config);

struct StepContext {
  std::size_t step = 0;
  std::size_t total_steps = 1;
  std::size_t phase1_steps = 0;
  int epoch = 0;
};

StepRecord training_step(std::span<const TrainItem* const> batch, ModelParams& params, AdamOptimizer& optimizer,
                         const TrainConfig& config, const StepContext& ctx);

/// Mean Φ(z_org, z_pos) - Φ(z_org, z_neg) over the first `max_triples`
/// triples, using the span representation.
double mean_margin(const ModelParams& params, const TrainingData& data, std::size_t max_triples);

struct EpochSummary {
  int epoch = 0;
  std::optional<EvalReport> report;
  double mean_margin = 0;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  int best_epoch = 0;
  TrainLog log;
  std::vector<EpochSummary> epochs;  // entry 0 is the untrained model
};

using EpochCallback = std::function<void(const EpochSummary&)>;

/// Epoch loop with per-epoch dev evaluation; keeps the best-EM parameters.
TrainResult train(const TrainingData& data, const EvalFeatures* dev_features, const Corpus* dev,
                  const TrainConfig& config, ModelParams initial, const EpochCallback& on_epoch = {});

struct TrainingRun {
  Vocabulary vocab;
  TrainingData data;
  TrainResult result;
};

/// Vocabulary, features and training in one call; the encoder's vocabulary
/// size and position table follow the data and window settings.
TrainingRun run_training(const Corpus& train_corpus, const std::vector<ContrastiveTriple>& triples,
                         const Corpus* dev, TrainConfig config, const EpochCallback& on_epoch = {});

}  // namespace spancl
