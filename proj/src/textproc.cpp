#include "spancl/textproc.hpp"

#include <algorithm>
#include <fstream>

#include "spancl/common.hpp"

namespace spancl {

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xa0 || (c >= 0x2000 && c <= 0x200b) || c == 0x202f || c == 0x205f || c == 0x3000;
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
           (c >= 0x7b && c <= 0x7e);
  }
  return (c >= 0xa1 && c <= 0xbf && c != 0xaa && c != 0xb2 && c != 0xb3 && c != 0xb5 &&
          c != 0xb9 && c != 0xba && !(c >= 0xbc && c <= 0xbe)) ||
         c == 0xd7 || c == 0xf7 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205e) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011);
}

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xc0 && c <= 0xde && c != 0xd7) return c + 32;
  return c;
}

}  // namespace

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[UNK]");
  add("[CLS]");
  add("[SEP]");
}

void Vocabulary::add(std::string token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::size_t>& counts,
                             std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary: " + path);
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (v.index_.contains(line)) throw ValidationError("duplicate vocabulary entry: " + line);
    v.add(line);
  }
  if (v.tokens_.size() < 4 || v.tokens_[kPad] != "[PAD]" || v.tokens_[kUnk] != "[UNK]" ||
      v.tokens_[kCls] != "[CLS]" || v.tokens_[kSep] != "[SEP]") {
    throw ValidationError("vocabulary must start with [PAD] [UNK] [CLS] [SEP]: " + path);
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  write_file(path, out);
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& t : tokens_) h = splitmix64(h ^ fnv1a(t));
  return h;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  const auto cps = utf8::decode(text);
  std::size_t i = 0;
  const std::size_t n = cps.size();
  auto emit = [&](std::size_t b, std::size_t e) {
    std::u32string lowered;
    lowered.reserve(e - b);
    for (std::size_t k = b; k < e; ++k) lowered.push_back(to_lower(cps[k]));
    seq.tokens.push_back(utf8::encode(lowered));
    seq.char_spans.push_back({b, e});
    seq.vocab_ids.push_back(vocab.id(seq.tokens.back()));
  };
  while (i < n) {
    if (is_space(cps[i])) {
      ++i;
    } else if (is_punct(cps[i])) {
      emit(i, i + 1);
      ++i;
    } else {
      std::size_t j = i;
      while (j < n && !is_space(cps[j]) && !is_punct(cps[j])) ++j;
      emit(i, j);
      i = j;
    }
  }
  return seq;
}

TokenSequence tokenize(std::string_view text) {
  static const Vocabulary empty;
  return tokenize(text, empty);
}

void count_tokens(const TokenSequence& seq, std::unordered_map<std::string, std::size_t>& counts) {
  for (const auto& t : seq.tokens) ++counts[t];
}

TokenSpan align_answer(const TokenSequence& passage_tokens, std::size_t answer_char_start,
                       std::string_view answer_text) {
  const std::size_t begin = answer_char_start;
  const std::size_t end = answer_char_start + utf8::length(answer_text);
  int first = -1;
  int last = -1;
  for (std::size_t k = 0; k < passage_tokens.char_spans.size(); ++k) {
    const auto& cs = passage_tokens.char_spans[k];
    if (cs.start < end && cs.end > begin) {
      if (first < 0) first = static_cast<int>(k);
      last = static_cast<int>(k);
    }
  }
  if (first < 0) {
    throw AlignmentError("answer \"" + std::string(answer_text) + "\" at char " +
                         std::to_string(answer_char_start) + " covers no token");
  }
  return {first, last};
}

std::vector<FeatureWindow> make_windows(const TokenSequence& question, const TokenSequence& passage,
                                        std::optional<TokenSpan> gold, const WindowConfig& config) {
  if (config.max_query_len >= config.max_seq_len - 3) {
    throw ConfigError("max_query_len must be smaller than max_seq_len - 3");
  }
  if (config.doc_stride < 1) throw ConfigError("doc_stride must be positive");

  const int q_len = std::min<int>(static_cast<int>(question.size()), config.max_query_len);
  const int budget = config.max_seq_len - q_len - 3;
  const int p_len = static_cast<int>(passage.size());

  std::vector<FeatureWindow> windows;
  int start = 0;
  while (true) {
    const int len = std::min(budget, p_len - start);
    FeatureWindow w;
    w.input_ids.reserve(static_cast<std::size_t>(config.max_seq_len));
    w.input_ids.push_back(Vocabulary::kCls);
    for (int k = 0; k < q_len; ++k) w.input_ids.push_back(question.vocab_ids[static_cast<std::size_t>(k)]);
    w.input_ids.push_back(Vocabulary::kSep);
    w.passage_token_offset = static_cast<int>(w.input_ids.size());
    for (int k = 0; k < len; ++k) {
      w.input_ids.push_back(passage.vocab_ids[static_cast<std::size_t>(start + k)]);
    }
    w.input_ids.push_back(Vocabulary::kSep);
    w.valid_len = static_cast<int>(w.input_ids.size());
    w.input_ids.resize(static_cast<std::size_t>(config.max_seq_len), Vocabulary::kPad);
    w.window_start = start;
    w.window_len = len;
    if (gold && w.contains(*gold)) {
      w.label = {w.to_sequence_position(gold->start), w.to_sequence_position(gold->end)};
    }
    windows.push_back(std::move(w));
    if (start + len >= p_len) break;
    start += std::min(len, config.doc_stride);
  }
  return windows;
}

}  // namespace spancl
