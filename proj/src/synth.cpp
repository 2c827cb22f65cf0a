#include "spancl/synth.hpp"

#include <array>
#include <random>
#include <string>
#include <vector>

#include "spancl/common.hpp"

namespace spancl {

namespace {

struct Verb {
  const char* base;
  const char* past;
  const char* synonym;
};

const std::vector<std::string> kGroups{"Europeans", "Mexicans", "Romans",   "Vikings",  "Egyptians", "Persians",
                                       "Greeks",    "Mongols",  "Incas",    "Normans",  "Saxons",    "Celts",
                                       "Aztecs",    "Spartans", "Venetians", "Franks"};

const std::vector<Verb> kVerbs{{"build", "built", "construct"},  {"paint", "painted", "decorate"},
                               {"sell", "sold", "trade"},        {"find", "found", "discover"},
                               {"carry", "carried", "transport"}, {"repair", "repaired", "fix"},
                               {"design", "designed", "plan"},   {"destroy", "destroyed", "ruin"},
                               {"steal", "stole", "take"},       {"bury", "buried", "hide"}};

const std::vector<std::string> kObjects{"bridge", "temple", "ship",   "statue", "map",    "tower",
                                        "wall",   "road",   "palace", "harbor", "market", "fountain",
                                        "garden", "library", "mill",  "canal"};

const std::vector<std::pair<std::string, std::string>> kAdjectives{
    {"enormous", "small"}, {"ancient", "modern"}, {"famous", "unknown"}, {"heavy", "light"},
    {"bright", "dark"},    {"wealthy", "poor"},   {"strong", "weak"},    {"beautiful", "ugly"}};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[uniform_index(rng, v.size())];
}

struct Fact {
  std::string group;
  Verb verb;
  std::string adjective;
  std::string object;
  int year = 0;
};

std::string article(const std::string& word) {
  return std::string("aeiou").find(word.front()) != std::string::npos ? "an" : "a";
}

std::string sentence(const Fact& f) {
  return "The " + f.group + " " + f.verb.past + " " + article(f.adjective) + " " + f.adjective + " " + f.object + " in " +
         std::to_string(f.year) + ".";
}

struct Generated {
  Passage passage;
  QAExample question;
};

Generated make_item(const std::string& id, int sentences, std::mt19937_64& rng) {
  std::vector<std::string> groups = kGroups;
  for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[uniform_index(rng, i)]);
  std::vector<Fact> facts;
  std::vector<int> years;
  for (int s = 0; s < sentences; ++s) {
    Fact f;
    f.group = groups[static_cast<std::size_t>(s)];
    f.verb = pick(kVerbs, rng);
    const auto& adj = pick(kAdjectives, rng);
    f.adjective = (rng() & 1U) ? adj.first : adj.second;
    f.object = pick(kObjects, rng);
    do {
      f.year = 1200 + static_cast<int>(uniform_index(rng, 800));
    } while (std::find(years.begin(), years.end(), f.year) != years.end());
    years.push_back(f.year);
    facts.push_back(std::move(f));
  }

  Generated g;
  g.passage.id = id;
  g.passage.title = "synthetic";
  std::vector<std::size_t> starts;
  for (const auto& f : facts) {
    if (!g.passage.text.empty()) g.passage.text += " ";
    starts.push_back(utf8::length(g.passage.text));
    g.passage.text += sentence(f);
  }

  const auto target = uniform_index(rng, facts.size());
  const Fact& f = facts[target];
  const std::size_t base = starts[target];
  const std::string prefix = "The " + f.group + " " + f.verb.past + " " + article(f.adjective) + " ";
  QAExample& q = g.question;
  q.id = id + "-q";
  q.passage_id = id;
  switch (uniform_index(rng, 3)) {
    case 0:
      q.question = "What did the " + f.group + " " + f.verb.base + " in " + std::to_string(f.year) + "?";
      q.answers.push_back({f.adjective + " " + f.object, base + utf8::length(prefix)});
      break;
    case 1:
      q.question = "Which " + f.adjective + " thing did the " + f.group + " " + f.verb.base + "?";
      q.answers.push_back({f.object, base + utf8::length(prefix + f.adjective + " ")});
      break;
    default:
      q.question = "In what year did the " + f.group + " " + f.verb.base + " the " + f.adjective + " " + f.object + "?";
      q.answers.push_back(
          {std::to_string(f.year), base + utf8::length(prefix + f.adjective + " " + f.object + " in ")});
      break;
  }
  return g;
}

}  // namespace

AugmentLexicons synthetic_lexicons() {
  AugmentLexicons lex = AugmentLexicons::defaults();
  lex.entity_gazetteer["NORP"] = kGroups;
  lex.entity_pool["NORP"] = kGroups;
  for (const auto& [a, b] : kAdjectives) {
    lex.antonyms[a] = b;
    lex.antonyms[b] = a;
    lex.pos_lexicon[a] = PosTag::Adj;
    lex.pos_lexicon[b] = PosTag::Adj;
  }
  for (const auto& v : kVerbs) {
    lex.synonyms[v.base] = {v.synonym};
    lex.pos_lexicon[v.base] = PosTag::Verb;
    lex.pos_lexicon[v.past] = PosTag::Verb;
  }
  lex.synonyms["thing"] = {"object"};
  std::vector<std::pair<std::string, std::string>> templates{
      {R"(^what did the (\w+) (\w+) in (\d+)\?$)", "in $3, what did the $1 $2?"},
      {R"(^which (\w+) thing did the (\w+) (\w+)\?$)", "the $2 $3 which $1 thing?"},
      {R"(^in what year did the (\w+) (\w+) the (\w+) (\w+)\?$)", "when did the $1 $2 the $3 $4?"},
  };
  templates.insert(templates.end(), lex.paraphrase_templates.begin(), lex.paraphrase_templates.end());
  lex.paraphrase_templates = std::move(templates);
  lex.validate();
  return lex;
}

SynthCorpus generate_synthetic(const SynthConfig& config) {
  if (config.sentences_per_passage < 1 ||
      static_cast<std::size_t>(config.sentences_per_passage) > kGroups.size()) {
    throw ConfigError("sentences_per_passage must be in [1, " + std::to_string(kGroups.size()) + "]");
  }
  SynthCorpus out;
  out.lexicons = synthetic_lexicons();
  std::mt19937_64 rng(derive_seed(config.seed, "synth.corpus"));
  for (std::size_t i = 0; i < config.train_passages; ++i) {
    auto g = make_item("train-" + std::to_string(i), config.sentences_per_passage, rng);
    out.train.add_passage(g.passage);
    out.train.add_example(g.question);
  }

  const LexiconAnnotator annotator(out.lexicons);
  for (std::size_t i = 0; i < config.dev_passages; ++i) {
    auto g = make_item("dev-" + std::to_string(i), config.sentences_per_passage, rng);
    out.dev.add_passage(g.passage);
    if (i % 2 == 1) {
      const auto neg = generate_negative(g.question.question, annotator, out.lexicons,
                                         derive_seed(config.seed, "synth.dev:" + g.question.id));
      if (neg) {
        g.question.plausible_answers = g.question.answers;
        g.question.answers.clear();
        g.question.answerable = false;
        g.question.question = neg->text;
      }
    }
    out.dev.add_example(g.question);
  }
  return out;
}

}  // namespace spancl
