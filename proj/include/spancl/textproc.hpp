#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spancl {

/// Half-open code-point range into a source string.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

/// Inclusive token (or sequence-position) range.
struct TokenSpan {
  int start = 0;
  int end = 0;
  bool operator==(const TokenSpan&) const = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<CharSpan> char_spans;
  std::vector<int> vocab_ids;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Vocabulary();

  /// Specials followed by every token seen at least `min_freq` times,
  /// ordered by descending frequency then lexicographically.
  static Vocabulary build(const std::unordered_map<std::string, std::size_t>& counts,
                          std::size_t min_freq = 2);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  std::uint64_t hash() const;

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Lowercasing word tokenizer. Whitespace separates tokens and every
/// punctuation mark is a token of its own. Offsets are in code points.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
TokenSequence tokenize(std::string_view text);

void count_tokens(const TokenSequence& seq, std::unordered_map<std::string, std::size_t>& counts);

/// Minimal token range covering [answer_char_start, answer_char_start + len(answer_text)).
TokenSpan align_answer(const TokenSequence& passage_tokens, std::size_t answer_char_start,
                       std::string_view answer_text);

struct WindowConfig {
  int max_seq_len = 512;
  int doc_stride = 128;
  int max_query_len = 64;
};

/// `[CLS] question [SEP] passage-slice [SEP]` followed by padding.
struct FeatureWindow {
  std::vector<int> input_ids;
  int valid_len = 0;
  int passage_token_offset = 0;
  int window_start = 0;
  int window_len = 0;
  TokenSpan label;  // (0,0) means no answer in this window

  bool has_answer() const { return label.start != 0 || label.end != 0; }
  /// Passage token index for a sequence position inside the slice.
  int to_passage_token(int seq_pos) const { return window_start + seq_pos - passage_token_offset; }
  int to_sequence_position(int passage_token) const {
    return passage_token_offset + passage_token - window_start;
  }
  bool contains(TokenSpan passage_span) const {
    return passage_span.start >= window_start && passage_span.end < window_start + window_len &&
           passage_span.start <= passage_span.end;
  }
};

std::vector<FeatureWindow> make_windows(const TokenSequence& question, const TokenSequence& passage,
                                        std::optional<TokenSpan> gold, const WindowConfig& config);

}  // namespace spancl
