#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spancl/textproc.hpp"

namespace spancl {

enum class PosTag { Verb, Noun, Adj, Adv, Other };

/// Where the negative question of a triple came from.
enum class NegSource { Dataset, Negation, Antonym, Entity, External };

std::string to_string(NegSource s);
NegSource neg_source_from_string(std::string_view s);
std::string to_string(PosTag t);
PosTag pos_tag_from_string(std::string_view s);

struct EntityMention {
  TokenSpan tokens;
  std::string type;
};

struct AnnotatedQuestion {
  std::string text;
  TokenSequence tokens;
  std::vector<PosTag> pos_tags;
  std::vector<EntityMention> entities;
};

/// Word lists driving annotation and both augmentation directions.
/// Keys are lowercase.
struct AugmentLexicons {
  std::map<std::string, std::string> antonyms;
  std::map<std::string, std::string> negation_forms;  // auxiliary -> negated form
  std::map<std::string, std::vector<std::string>> entity_pool;
  std::map<std::string, std::vector<std::string>> entity_gazetteer;
  std::map<std::string, PosTag> pos_lexicon;
  std::map<std::string, std::vector<std::string>> synonyms;
  std::vector<std::pair<std::string, std::string>> paraphrase_templates;  // ECMAScript regex, replacement

  /// Negation forms and paraphrase templates for English; everything else empty.
  static AugmentLexicons defaults();
  /// Sections missing from the file keep their default value.
  static AugmentLexicons from_json(const nlohmann::json& j);
  static AugmentLexicons load(const std::string& path);
  nlohmann::json to_json() const;

  /// Throws ValidationError if an antonym maps a word to itself.
  void validate() const;
  /// Drops every pool entry whose surface form occurs in one of `questions`.
  void exclude_question_surfaces(const std::vector<std::string>& questions);

  /// negated form -> auxiliary
  std::map<std::string, std::string> negation_inverse() const;
};

class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual AnnotatedQuestion annotate(std::string_view question) const = 0;
};

/// Closed-list tagger: lexicon entries first, then function words, then
/// suffix heuristics, NOUN otherwise. Entities come from the gazetteer plus
/// capitalized runs (typed MISC) away from the sentence start.
class LexiconAnnotator : public Annotator {
 public:
  explicit LexiconAnnotator(const AugmentLexicons& lexicons);
  AnnotatedQuestion annotate(std::string_view question) const override;

 private:
  const AugmentLexicons& lexicons_;
  std::vector<std::pair<std::vector<std::string>, std::string>> gazetteer_;  // longest first
};

class TranslatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Round-trip translation through a pivot language.
class TranslatorClient {
 public:
  virtual ~TranslatorClient() = default;
  virtual std::string round_trip(std::string_view text, std::string_view pivot) = 0;
};

/// Offline emulation of back translation. Each pivot selects one rewrite
/// path: synonym substitution, template reordering, or a seeded mix.
class OfflineTranslator : public TranslatorClient {
 public:
  OfflineTranslator(const AugmentLexicons& lexicons, std::uint64_t seed);
  std::string round_trip(std::string_view text, std::string_view pivot) override;

  std::string substitute_synonyms(std::string_view text, std::mt19937_64* rng) const;
  std::string apply_template(std::string_view text) const;

 private:
  const AugmentLexicons& lexicons_;
  std::uint64_t seed_;
};

/// POSTs {"text", "pivot"} and expects {"text"} back.
class HttpTranslator : public TranslatorClient {
 public:
  explicit HttpTranslator(std::string url,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  std::string round_trip(std::string_view text, std::string_view pivot) override;

 private:
  std::string base_;
  std::string path_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
};

inline const std::vector<std::string>& default_pivots() {
  static const std::vector<std::string> pivots{"fr", "de", "es"};
  return pivots;
}

struct ParaphraseCandidates {
  std::vector<std::string> candidates;
  bool used_fallback = false;
};

/// One candidate per pivot. Any client failure switches the whole question
/// to `fallback` and sets `used_fallback`.
ParaphraseCandidates backtranslate_candidates(std::string_view question, TranslatorClient& client,
                                              TranslatorClient& fallback,
                                              const std::vector<std::string>& pivots = default_pivots());

std::size_t token_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::size_t token_edit_distance(const TokenSequence& a, const TokenSequence& b);

/// Candidate with the largest token edit distance to `original`; earliest
/// index wins ties. nullopt when every candidate is at distance 0.
std::optional<std::string> select_paraphrase(std::string_view original,
                                             const std::vector<std::string>& candidates);

std::optional<std::string> negate(const AnnotatedQuestion& question, const AugmentLexicons& lexicons);
std::optional<std::string> antonym_swap(const AnnotatedQuestion& question,
                                        const AugmentLexicons& lexicons, std::mt19937_64& rng);
std::optional<std::string> entity_replace(const AnnotatedQuestion& question,
                                          const AugmentLexicons& lexicons, std::mt19937_64& rng);

struct NegativeQuestion {
  std::string text;
  NegSource strategy;
};

/// Tries negation, antonym and entity replacement in a seeded order.
std::optional<NegativeQuestion> generate_negative(std::string_view question,
                                                  const Annotator& annotator,
                                                  const AugmentLexicons& lexicons,
                                                  std::uint64_t seed);

/// Uniform index in [0, n) by rejection; independent of the standard
/// library's distribution implementation.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

}  // namespace spancl
