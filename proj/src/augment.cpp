#include "spancl/augment.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <set>

#include "httplib.h"
#include "spancl/common.hpp"

namespace spancl {

namespace {

bool is_upper(char32_t c) { return (c >= U'A' && c <= U'Z') || (c >= 0xc0 && c <= 0xde && c != 0xd7); }

bool is_word_token(const std::string& tok) {
  if (tok.empty()) return false;
  auto c = static_cast<unsigned char>(tok[0]);
  return c >= 0x80 || std::isalnum(c);
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string capitalize_first(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 32);
  return s;
}

/// Capitalizes `replacement` when the replaced surface form started uppercase.
std::string match_case(std::u32string_view original, std::string replacement) {
  if (!original.empty() && is_upper(original[0])) return capitalize_first(std::move(replacement));
  return replacement;
}

struct Edit {
  CharSpan span;
  std::string replacement;
};

/// Applies non-overlapping edits given in code-point coordinates.
std::string apply_edits(std::string_view text, std::vector<Edit> edits) {
  auto cps = utf8::decode(text);
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.span.start > b.span.start; });
  for (const auto& e : edits) {
    auto rep = utf8::decode(e.replacement);
    cps.replace(e.span.start, e.span.end - e.span.start, rep);
  }
  return utf8::encode(cps);
}

/// Removes a word and the single space that separated it from its neighbour.
std::string remove_word(std::string_view text, CharSpan span) {
  auto cps = utf8::decode(text);
  std::size_t b = span.start;
  std::size_t e = span.end;
  if (e < cps.size() && cps[e] == U' ') {
    ++e;
  } else if (b > 0 && cps[b - 1] == U' ') {
    --b;
  }
  cps.erase(b, e - b);
  return utf8::encode(cps);
}

struct SurfaceWord {
  CharSpan span;
  std::string lower;
};

/// Re-joins contractions the tokenizer split apart ("wasn", "'", "t").
std::vector<SurfaceWord> surface_words(const TokenSequence& toks) {
  std::vector<SurfaceWord> words;
  const auto& t = toks.tokens;
  const auto& cs = toks.char_spans;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!is_word_token(t[i])) continue;
    SurfaceWord w{cs[i], t[i]};
    while (i + 2 < t.size() && (t[i + 1] == "'" || t[i + 1] == "\xe2\x80\x99") &&
           is_word_token(t[i + 2]) && cs[i + 1].start == w.span.end && cs[i + 2].start == cs[i + 1].end) {
      w.lower += "'" + t[i + 2];
      w.span.end = cs[i + 2].end;
      i += 2;
    }
    words.push_back(std::move(w));
  }
  return words;
}

const std::set<std::string>& function_words() {
  static const std::set<std::string> words{
      "a",     "an",    "the",   "of",     "in",    "on",    "at",    "to",    "for",   "from",
      "by",    "with",  "about", "as",     "into",  "than",  "and",   "or",    "but",   "not",
      "what",  "which", "who",   "whom",   "whose", "when",  "where", "why",   "how",   "is",
      "are",   "was",   "were",  "be",     "been",  "being", "do",    "does",  "did",   "has",
      "have",  "had",   "can",   "could",  "will",  "would", "should", "may",  "might", "must",
      "shall", "it",    "its",   "this",   "that",  "these", "those", "he",    "she",   "they",
      "them",  "his",   "her",   "their",  "i",     "you",   "we",    "there", "if",    "so",
      "s",     "t",     "after", "before", "during", "many", "much",  "some",  "any",   "no"};
  return words;
}

PosTag heuristic_tag(const std::string& w) {
  if (!is_word_token(w)) return PosTag::Other;
  if (std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); })) return PosTag::Other;
  if (function_words().contains(w)) return PosTag::Other;
  auto ends = [&](std::string_view suf) {
    return w.size() > suf.size() + 2 && std::string_view(w).substr(w.size() - suf.size()) == suf;
  };
  if (ends("ly")) return PosTag::Adv;
  if (ends("ing") || ends("ed")) return PosTag::Verb;
  for (auto suf : {"ous", "ful", "able", "ible", "al", "ive", "ic", "less"}) {
    if (ends(suf)) return PosTag::Adj;
  }
  return PosTag::Noun;
}

bool is_content(PosTag t) { return t != PosTag::Other; }

}  // namespace

std::string to_string(NegSource s) {
  switch (s) {
    case NegSource::Dataset: return "dataset";
    case NegSource::Negation: return "negation";
    case NegSource::Antonym: return "antonym";
    case NegSource::Entity: return "entity";
    case NegSource::External: return "external";
  }
  return "unknown";
}

NegSource neg_source_from_string(std::string_view s) {
  if (s == "dataset") return NegSource::Dataset;
  if (s == "negation") return NegSource::Negation;
  if (s == "antonym") return NegSource::Antonym;
  if (s == "entity") return NegSource::Entity;
  if (s == "external") return NegSource::External;
  throw ValidationError("unknown neg_source: " + std::string(s));
}

std::string to_string(PosTag t) {
  switch (t) {
    case PosTag::Verb: return "VERB";
    case PosTag::Noun: return "NOUN";
    case PosTag::Adj: return "ADJ";
    case PosTag::Adv: return "ADV";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PosTag pos_tag_from_string(std::string_view s) {
  if (s == "VERB") return PosTag::Verb;
  if (s == "NOUN") return PosTag::Noun;
  if (s == "ADJ") return PosTag::Adj;
  if (s == "ADV") return PosTag::Adv;
  if (s == "OTHER") return PosTag::Other;
  throw ValidationError("unknown POS tag: " + std::string(s));
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw InputError("uniform_index over an empty range");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

// ---------------------------------------------------------------------------
// Lexicons

AugmentLexicons AugmentLexicons::defaults() {
  AugmentLexicons lex;
  lex.negation_forms = {{"is", "isn't"},       {"are", "aren't"},     {"was", "wasn't"},
                        {"were", "weren't"},   {"do", "don't"},       {"does", "doesn't"},
                        {"did", "didn't"},     {"has", "hasn't"},     {"have", "haven't"},
                        {"had", "hadn't"},     {"can", "can't"},      {"could", "couldn't"},
                        {"will", "won't"},     {"would", "wouldn't"}, {"should", "shouldn't"},
                        {"must", "mustn't"},   {"might", "mightn't"}};
  lex.paraphrase_templates = {
      {R"(^when (was|were|did|is|are|does|do) (.+)\?$)", "at what time $1 $2?"},
      {R"(^what year (was|were|did|is|does) (.+)\?$)", "in which year $1 $2?"},
      {R"(^in what year (was|were|did|is|does) (.+)\?$)", "which year $1 $2?"},
      {R"(^who (.+)\?$)", "which person $1?"},
      {R"(^where (.+)\?$)", "in what place $1?"},
      {R"(^how many (.+)\?$)", "what number of $1?"},
      {R"(^what (is|was|are|were) (.+)\?$)", "which thing $1 $2?"},
      {R"(^which (.+)\?$)", "what $1?"},
      {R"(^what (.+)\?$)", "which $1?"},
  };
  return lex;
}

AugmentLexicons AugmentLexicons::from_json(const nlohmann::json& j) {
  AugmentLexicons lex = defaults();
  auto lower_map = [](const nlohmann::json& obj) {
    std::map<std::string, std::string> m;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      m[lower_ascii(it.key())] = it.value().get<std::string>();
    }
    return m;
  };
  auto list_map = [](const nlohmann::json& obj, bool lower_keys) {
    std::map<std::string, std::vector<std::string>> m;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      auto key = lower_keys ? lower_ascii(it.key()) : it.key();
      m[key] = it.value().get<std::vector<std::string>>();
    }
    return m;
  };
  if (j.contains("antonyms")) lex.antonyms = lower_map(j["antonyms"]);
  if (j.contains("negation_forms")) lex.negation_forms = lower_map(j["negation_forms"]);
  if (j.contains("entity_pool")) lex.entity_pool = list_map(j["entity_pool"], false);
  if (j.contains("entity_gazetteer")) lex.entity_gazetteer = list_map(j["entity_gazetteer"], false);
  if (j.contains("synonyms")) lex.synonyms = list_map(j["synonyms"], true);
  if (j.contains("pos_tags")) {
    for (auto it = j["pos_tags"].begin(); it != j["pos_tags"].end(); ++it) {
      lex.pos_lexicon[lower_ascii(it.key())] = pos_tag_from_string(it.value().get<std::string>());
    }
  }
  if (j.contains("paraphrase_templates")) {
    lex.paraphrase_templates.clear();
    for (const auto& t : j["paraphrase_templates"]) {
      lex.paraphrase_templates.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
    }
  }
  lex.validate();
  return lex;
}

AugmentLexicons AugmentLexicons::load(const std::string& path) {
  const auto text = read_file(path);
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

nlohmann::json AugmentLexicons::to_json() const {
  nlohmann::json j;
  j["antonyms"] = antonyms;
  j["negation_forms"] = negation_forms;
  j["entity_pool"] = entity_pool;
  j["entity_gazetteer"] = entity_gazetteer;
  j["synonyms"] = synonyms;
  nlohmann::json tags = nlohmann::json::object();
  for (const auto& [w, t] : pos_lexicon) tags[w] = to_string(t);
  j["pos_tags"] = tags;
  nlohmann::json templates = nlohmann::json::array();
  for (const auto& [pat, rep] : paraphrase_templates) templates.push_back({pat, rep});
  j["paraphrase_templates"] = templates;
  return j;
}

void AugmentLexicons::validate() const {
  for (const auto& [w, a] : antonyms) {
    if (lower_ascii(a) == w) throw ValidationError("antonym maps a word to itself: " + w);
  }
}

void AugmentLexicons::exclude_question_surfaces(const std::vector<std::string>& questions) {
  // Compare on token sequences so "Mexicans?" still excludes "Mexicans".
  std::vector<std::vector<std::string>> question_tokens;
  question_tokens.reserve(questions.size());
  for (const auto& q : questions) question_tokens.push_back(tokenize(q).tokens);
  auto occurs = [&](const std::string& surface) {
    const auto needle = tokenize(surface).tokens;
    if (needle.empty()) return false;
    for (const auto& hay : question_tokens) {
      if (std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end()) return true;
    }
    return false;
  };
  for (auto& [type, forms] : entity_pool) {
    std::erase_if(forms, occurs);
  }
}

std::map<std::string, std::string> AugmentLexicons::negation_inverse() const {
  std::map<std::string, std::string> inv;
  for (const auto& [aux, neg] : negation_forms) inv[lower_ascii(neg)] = aux;
  return inv;
}

// ---------------------------------------------------------------------------
// Annotation

LexiconAnnotator::LexiconAnnotator(const AugmentLexicons& lexicons) : lexicons_(lexicons) {
  for (const auto& [type, forms] : lexicons_.entity_gazetteer) {
    for (const auto& f : forms) {
      auto toks = tokenize(f).tokens;
      if (!toks.empty()) gazetteer_.emplace_back(std::move(toks), type);
    }
  }
  std::stable_sort(gazetteer_.begin(), gazetteer_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

AnnotatedQuestion LexiconAnnotator::annotate(std::string_view question) const {
  AnnotatedQuestion aq;
  aq.text = std::string(question);
  aq.tokens = tokenize(question);
  const auto& toks = aq.tokens.tokens;
  aq.pos_tags.reserve(toks.size());
  for (const auto& t : toks) {
    auto it = lexicons_.pos_lexicon.find(t);
    aq.pos_tags.push_back(it != lexicons_.pos_lexicon.end() ? it->second : heuristic_tag(t));
  }

  std::vector<bool> covered(toks.size(), false);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    for (const auto& [form, type] : gazetteer_) {
      if (i + form.size() > toks.size()) continue;
      bool free = true;
      for (std::size_t k = 0; k < form.size() && free; ++k) free = !covered[i + k] && toks[i + k] == form[k];
      if (!free) continue;
      for (std::size_t k = 0; k < form.size(); ++k) covered[i + k] = true;
      aq.entities.push_back({{static_cast<int>(i), static_cast<int>(i + form.size() - 1)}, type});
      break;
    }
  }

  const auto cps = utf8::decode(question);
  std::size_t i = 1;
  while (i < toks.size()) {
    auto capital = [&](std::size_t k) {
      return !covered[k] && is_word_token(toks[k]) && is_upper(cps[aq.tokens.char_spans[k].start]);
    };
    if (!capital(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < toks.size() && capital(j + 1)) ++j;
    aq.entities.push_back({{static_cast<int>(i), static_cast<int>(j)}, "MISC"});
    i = j + 1;
  }
  std::sort(aq.entities.begin(), aq.entities.end(),
            [](const EntityMention& a, const EntityMention& b) { return a.tokens.start < b.tokens.start; });
  return aq;
}

// ---------------------------------------------------------------------------
// Paraphrases

OfflineTranslator::OfflineTranslator(const AugmentLexicons& lexicons, std::uint64_t seed)
    : lexicons_(lexicons), seed_(seed) {}

std::string OfflineTranslator::substitute_synonyms(std::string_view text, std::mt19937_64* rng) const {
  const auto toks = tokenize(text);
  const auto cps = utf8::decode(text);
  std::vector<Edit> edits;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    auto it = lexicons_.synonyms.find(toks.tokens[i]);
    if (it == lexicons_.synonyms.end() || it->second.empty()) continue;
    std::string pick = it->second.front();
    if (rng != nullptr) {
      if (((*rng)() & 1U) == 0) continue;
      pick = it->second[uniform_index(*rng, it->second.size())];
    }
    const auto span = toks.char_spans[i];
    edits.push_back({span, match_case(std::u32string_view(cps).substr(span.start, span.end - span.start), pick)});
  }
  return apply_edits(text, std::move(edits));
}

std::string OfflineTranslator::apply_template(std::string_view text) const {
  const std::string s(text);
  for (const auto& [pattern, replacement] : lexicons_.paraphrase_templates) {
    const std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
    if (std::regex_match(s, re)) {
      auto out = std::regex_replace(s, re, replacement);
      return out == s ? s : capitalize_first(std::move(out));
    }
  }
  return s;
}

std::string OfflineTranslator::round_trip(std::string_view text, std::string_view pivot) {
  const auto& pivots = default_pivots();
  auto it = std::find(pivots.begin(), pivots.end(), pivot);
  const std::size_t path = it != pivots.end() ? static_cast<std::size_t>(it - pivots.begin())
                                              : static_cast<std::size_t>(fnv1a(pivot) % 3);
  switch (path) {
    case 0:
      return substitute_synonyms(text, nullptr);
    case 1:
      return apply_template(text);
    default: {
      std::mt19937_64 rng(derive_seed(seed_, std::string(text) + "\x1f" + std::string(pivot)));
      return substitute_synonyms(apply_template(text), &rng);
    }
  }
}

HttpTranslator::HttpTranslator(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("translator URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

std::string HttpTranslator::round_trip(std::string_view text, std::string_view pivot) {
  std::lock_guard lock(mutex_);
  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(timeout_.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout_.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  const nlohmann::json body{{"text", text}, {"pivot", pivot}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw TranslatorError("translator request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TranslatorError("translator returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TranslatorError(std::string("bad translator response: ") + e.what());
  }
}

ParaphraseCandidates backtranslate_candidates(std::string_view question, TranslatorClient& client,
                                              TranslatorClient& fallback,
                                              const std::vector<std::string>& pivots) {
  ParaphraseCandidates out;
  try {
    for (const auto& p : pivots) out.candidates.push_back(client.round_trip(question, p));
    return out;
  } catch (const std::exception&) {
    out.candidates.clear();
    out.used_fallback = true;
  }
  for (const auto& p : pivots) out.candidates.push_back(fallback.round_trip(question, p));
  return out;
}

std::size_t token_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t token_edit_distance(const TokenSequence& a, const TokenSequence& b) {
  return token_edit_distance(a.tokens, b.tokens);
}

std::optional<std::string> select_paraphrase(std::string_view original,
                                             const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw InputError("select_paraphrase needs at least one candidate");
  const auto orig = tokenize(original).tokens;
  std::size_t best = 0;
  std::size_t best_dist = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto d = token_edit_distance(orig, tokenize(candidates[k]).tokens);
    if (d > best_dist) {
      best_dist = d;
      best = k;
    }
  }
  if (best_dist == 0) return std::nullopt;
  return candidates[best];
}

// ---------------------------------------------------------------------------
// Negatives

std::optional<std::string> negate(const AnnotatedQuestion& question, const AugmentLexicons& lexicons) {
  const auto words = surface_words(question.tokens);
  const auto cps = utf8::decode(question.text);
  auto surface = [&](CharSpan s) { return std::u32string_view(cps).substr(s.start, s.end - s.start); };

  const auto inverse = lexicons.negation_inverse();
  for (const auto& w : words) {
    auto it = inverse.find(w.lower);
    if (it != inverse.end()) {
      return apply_edits(question.text, {{w.span, match_case(surface(w.span), it->second)}});
    }
  }
  for (const auto& w : words) {
    if (w.lower == "not" || w.lower == "never") return remove_word(question.text, w.span);
  }
  for (const auto& w : words) {
    auto it = lexicons.negation_forms.find(w.lower);
    if (it != lexicons.negation_forms.end()) {
      return apply_edits(question.text, {{w.span, match_case(surface(w.span), it->second)}});
    }
  }
  return std::nullopt;
}

std::optional<std::string> antonym_swap(const AnnotatedQuestion& question,
                                        const AugmentLexicons& lexicons, std::mt19937_64& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < question.tokens.size(); ++i) {
    if (is_content(question.pos_tags[i]) && lexicons.antonyms.contains(question.tokens.tokens[i])) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) return std::nullopt;
  const auto pick = eligible[uniform_index(rng, eligible.size())];
  const auto span = question.tokens.char_spans[pick];
  const auto cps = utf8::decode(question.text);
  const auto& antonym = lexicons.antonyms.at(question.tokens.tokens[pick]);
  return apply_edits(question.text,
                     {{span, match_case(std::u32string_view(cps).substr(span.start, span.end - span.start), antonym)}});
}

std::optional<std::string> entity_replace(const AnnotatedQuestion& question,
                                          const AugmentLexicons& lexicons, std::mt19937_64& rng) {
  const auto cps = utf8::decode(question.text);
  struct Option {
    CharSpan span;
    std::vector<std::string> candidates;
  };
  std::vector<Option> options;
  for (const auto& m : question.entities) {
    auto it = lexicons.entity_pool.find(m.type);
    if (it == lexicons.entity_pool.end()) continue;
    const CharSpan span{question.tokens.char_spans[static_cast<std::size_t>(m.tokens.start)].start,
                        question.tokens.char_spans[static_cast<std::size_t>(m.tokens.end)].end};
    const auto original = lower_ascii(utf8::encode(std::u32string_view(cps).substr(span.start, span.end - span.start)));
    Option opt{span, {}};
    for (const auto& c : it->second) {
      if (lower_ascii(c) != original) opt.candidates.push_back(c);
    }
    if (!opt.candidates.empty()) options.push_back(std::move(opt));
  }
  if (options.empty()) return std::nullopt;
  const auto& chosen = options[uniform_index(rng, options.size())];
  const auto& replacement = chosen.candidates[uniform_index(rng, chosen.candidates.size())];
  return apply_edits(question.text, {{chosen.span, replacement}});
}

std::optional<NegativeQuestion> generate_negative(std::string_view question, const Annotator& annotator,
                                                  const AugmentLexicons& lexicons, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<NegSource, 3> order{NegSource::Negation, NegSource::Antonym, NegSource::Entity};
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  const auto aq = annotator.annotate(question);
  for (auto strategy : order) {
    std::optional<std::string> out;
    switch (strategy) {
      case NegSource::Negation: out = negate(aq, lexicons); break;
      case NegSource::Antonym: out = antonym_swap(aq, lexicons, rng); break;
      case NegSource::Entity: out = entity_replace(aq, lexicons, rng); break;
      default: break;
    }
    if (out && *out != aq.text) return NegativeQuestion{std::move(*out), strategy};
  }
  return std::nullopt;
}

}  // namespace spancl
