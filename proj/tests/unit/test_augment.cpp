#include <random>
#include <set>

#include "doctest.h"
#include "spancl/augment.hpp"
#include "spancl/common.hpp"
#include "spancl/textproc.hpp"

using namespace spancl;

namespace {

AugmentLexicons fixture_lexicons() { return AugmentLexicons::load(std::string(SPANCL_FIXTURES) + "/lexicons.json"); }

class IdentityClient : public TranslatorClient {
 public:
  std::string round_trip(std::string_view text, std::string_view) override { return std::string(text); }
};

class FixedClient : public TranslatorClient {
 public:
  std::string round_trip(std::string_view, std::string_view pivot) override { return "fixed " + std::string(pivot); }
};

class FailingClient : public TranslatorClient {
 public:
  std::string round_trip(std::string_view, std::string_view) override { throw TranslatorError("down"); }
};

std::size_t dp_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

}  // namespace

TEST_CASE("token edit distance") {
  using V = std::vector<std::string>;
  CHECK(token_edit_distance(V{"a", "b"}, V{"a", "b"}) == 0);
  CHECK(token_edit_distance(V{"what", "was", "x"}, V{"what", "wasn't", "x"}) == 1);
  CHECK(token_edit_distance(V{}, V{"a", "b", "c"}) == 3);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    V a, b;
    for (std::size_t i = rng() % 7; i > 0; --i) a.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    for (std::size_t i = rng() % 7; i > 0; --i) b.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    CHECK(token_edit_distance(a, b) == dp_oracle(a, b));
    CHECK(token_edit_distance(a, b) == token_edit_distance(b, a));
  }
}

TEST_CASE("select_paraphrase") {
  // distances to "a b c": 0, 2, 1
  CHECK(select_paraphrase("a b c", {"a b c", "x y c", "a b d"}) == "x y c");
  // equal distances: the first wins
  CHECK(select_paraphrase("a b c", {"x y c", "a y z"}) == "x y c");
  CHECK_FALSE(select_paraphrase("a b c", {"a b c", "A b c"}).has_value());
  CHECK_THROWS_AS(select_paraphrase("a b c", {}), InputError);
}

TEST_CASE("back-translation candidates") {
  const auto lex = fixture_lexicons();
  OfflineTranslator offline(lex, 3);
  const std::string q = "When did the film come out?";

  IdentityClient identity;
  auto c = backtranslate_candidates(q, identity, offline);
  CHECK(c.candidates == std::vector<std::string>(3, q));
  CHECK_FALSE(c.used_fallback);

  FixedClient fixed;
  c = backtranslate_candidates(q, fixed, offline);
  CHECK(c.candidates == std::vector<std::string>{"fixed fr", "fixed de", "fixed es"});

  FailingClient failing;
  c = backtranslate_candidates(q, failing, offline);
  CHECK(c.used_fallback);
  REQUIRE(c.candidates.size() == 3);
  CHECK(c.candidates[0] == "When did the movie come out?");
  CHECK(offline.substitute_synonyms(q, nullptr) == "When did the movie come out?");

  // The offline paths are deterministic for a fixed seed.
  OfflineTranslator again(lex, 3);
  CHECK(backtranslate_candidates(q, failing, again).candidates == c.candidates);
}

TEST_CASE("worked distortion examples") {
  const auto lex = fixture_lexicons();
  const LexiconAnnotator ann(lex);
  std::mt19937_64 rng(0);

  CHECK(negate(ann.annotate("What was Beyonce's role in Destiny's Child?"), lex) ==
        "What wasn't Beyonce's role in Destiny's Child?");
  CHECK(entity_replace(ann.annotate("What native people lived in the San Diego area before the Europeans arrived?"),
                       lex, rng) == "What native people lived in the San Diego area before the Mexicans arrived?");
  CHECK(antonym_swap(ann.annotate("What part of Gothic buildings are often found terminated with enormous pinnacles?"),
                     lex, rng) == "What part of Gothic buildings are often found terminated with small pinnacles?");
}

TEST_CASE("negation") {
  const auto lex = fixture_lexicons();
  const LexiconAnnotator ann(lex);
  CHECK(negate(ann.annotate("What wasn't X?"), lex) == "What was X?");
  CHECK(negate(ann.annotate("Was it here?"), lex) == "Wasn't it here?");
  CHECK_FALSE(negate(ann.annotate("Which city?"), lex).has_value());
}

TEST_CASE("antonym and entity edge cases") {
  const auto lex = fixture_lexicons();
  const LexiconAnnotator ann(lex);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    CHECK(antonym_swap(ann.annotate("Who built the enormous tower?"), lex, rng) == "Who built the small tower?");
  }
  std::mt19937_64 rng(0);
  CHECK_FALSE(antonym_swap(ann.annotate("Who built the tower?"), lex, rng).has_value());
  CHECK_FALSE(entity_replace(ann.annotate("who built the tower?"), lex, rng).has_value());

  AugmentLexicons empty_pool = lex;
  empty_pool.entity_pool.clear();
  CHECK_FALSE(entity_replace(ann.annotate("When did the Europeans arrive?"), empty_pool, rng).has_value());

  AugmentLexicons bad = lex;
  bad.antonyms["same"] = "same";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("entity pools drop surfaces seen in corpus questions") {
  auto lex = fixture_lexicons();
  lex.entity_pool["GROUP"] = {"Mexicans", "Romans"};
  lex.exclude_question_surfaces({"Did the Mexicans win?"});
  CHECK(lex.entity_pool["GROUP"] == std::vector<std::string>{"Romans"});
}

TEST_CASE("generate_negative") {
  const auto lex = fixture_lexicons();
  const LexiconAnnotator ann(lex);

  const auto only_negation = generate_negative("Who was the king?", ann, lex, 5);
  REQUIRE(only_negation.has_value());
  CHECK(only_negation->strategy == NegSource::Negation);
  CHECK(only_negation->text == "Who wasn't the king?");

  CHECK_FALSE(generate_negative("Which city?", ann, lex, 5).has_value());

  const std::string all = "Was the enormous hall built before the Europeans arrived?";
  std::set<NegSource> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto a = generate_negative(all, ann, lex, seed);
    const auto b = generate_negative(all, ann, lex, seed);
    REQUIRE(a.has_value());
    CHECK(a->text == b->text);
    CHECK(a->strategy == b->strategy);
    seen.insert(a->strategy);

    // Subtle change: at least one edit, at least half the tokens shared.
    const auto ta = tokenize(all);
    const auto tn = tokenize(a->text);
    const auto d = token_edit_distance(ta, tn);
    CHECK(d >= 1);
    CHECK(static_cast<double>(d) <= 0.5 * static_cast<double>(std::max(ta.size(), tn.size())));
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("lexicons survive a JSON round trip") {
  const auto lex = fixture_lexicons();
  const auto back = AugmentLexicons::from_json(lex.to_json());
  CHECK(back.antonyms == lex.antonyms);
  CHECK(back.entity_pool == lex.entity_pool);
  CHECK(back.synonyms == lex.synonyms);
  CHECK(back.paraphrase_templates == lex.paraphrase_templates);
  CHECK(back.pos_lexicon == lex.pos_lexicon);
}
