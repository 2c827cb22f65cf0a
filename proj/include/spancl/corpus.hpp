#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "spancl/augment.hpp"

namespace spancl {

struct Passage {
  std::string id;
  std::string title;
  std::string text;
  bool operator==(const Passage&) const = default;
};

/// Character offsets are code points, as in the SQuAD files.
struct Answer {
  std::string text;
  std::size_t char_start = 0;
  bool operator==(const Answer&) const = default;
};

struct QAExample {
  std::string id;
  std::string passage_id;
  std::string question;
  bool answerable = true;
  std::vector<Answer> answers;
  std::vector<Answer> plausible_answers;

  /// Training span: the first gold answer.
  const Answer& primary_answer() const { return answers.front(); }
  std::vector<std::string> gold_texts() const;
  bool operator==(const QAExample&) const = default;
};

class Corpus {
 public:
  std::string version = "v2.0";

  /// Throws ValidationError on a duplicate id or empty text.
  void add_passage(Passage p);
  /// Validates the example against its passage before adding it.
  void add_example(QAExample ex);

  const std::vector<Passage>& passages() const { return passages_; }
  const std::vector<QAExample>& examples() const { return examples_; }
  const Passage& passage(const std::string& id) const;
  const QAExample* find_example(const std::string& id) const;

  std::size_t answerable_count() const;
  std::size_t unanswerable_count() const;

 private:
  std::vector<Passage> passages_;
  std::vector<QAExample> examples_;
  std::unordered_map<std::string, std::size_t> passage_index_;
  std::unordered_map<std::string, std::size_t> example_index_;
};

/// The substring of `text` starting at `char_start` must equal `answer.text`.
bool answer_matches(std::string_view text, const Answer& answer);

Corpus parse_squad(std::string_view json_text);
Corpus load_squad(const std::string& path);
nlohmann::json to_squad_json(const Corpus& corpus);
void save_squad(const Corpus& corpus, const std::string& path);

struct ContrastiveTriple {
  std::string question_id;
  std::string passage_id;
  std::string q_org;
  std::string q_pos;
  std::string q_neg;
  std::string answer_text;
  std::size_t answer_char_start = 0;
  NegSource neg_source = NegSource::Dataset;
  std::string pos_provenance = "offline";  // "translator" or "offline"
  bool operator==(const ContrastiveTriple&) const = default;
};

nlohmann::json to_json(const ContrastiveTriple& t);
ContrastiveTriple triple_from_json(const nlohmann::json& j);
void save_triples_jsonl(const std::vector<ContrastiveTriple>& triples, const std::string& path);
std::vector<ContrastiveTriple> load_triples_jsonl(const std::string& path);
/// Throws ValidationError unless the triple is well-formed against `corpus`.
void validate_triple(const ContrastiveTriple& t, const Corpus& corpus);

/// answerable question id -> unanswerable question id
using NegativePairing = std::map<std::string, std::string>;

/// Pairs each answerable question with an unused unanswerable question of
/// the same passage whose first plausible answer equals its first gold answer.
NegativePairing pair_dataset_negatives(const Corpus& corpus);

/// question id -> externally generated negative question
std::map<std::string, std::string> load_external_negatives(const std::string& path);

struct Augmenter {
  const AugmentLexicons* lexicons = nullptr;
  const Annotator* annotator = nullptr;
  TranslatorClient* translator = nullptr;  // may be the offline emulator itself
  TranslatorClient* fallback = nullptr;
  std::uint64_t seed = 0;
};

struct TripleBuildStats {
  std::size_t answerable = 0;
  std::size_t emitted = 0;
  std::size_t skipped_no_paraphrase = 0;
  std::size_t skipped_no_negative = 0;
  std::size_t translator_fallbacks = 0;
  std::map<std::string, std::size_t> per_source;

  std::size_t skipped() const { return skipped_no_paraphrase + skipped_no_negative; }
  nlohmann::json to_json() const;
};

struct TripleBuildResult {
  std::vector<ContrastiveTriple> triples;
  TripleBuildStats stats;
};

/// One triple per answerable question, in corpus order. Negatives come from
/// the dataset pairing, then `external`, then generation.
TripleBuildResult build_triples(const Corpus& corpus, const Augmenter& augmenter,
                                const NegativePairing& pairing,
                                const std::map<std::string, std::string>* external = nullptr);

}  // namespace spancl
