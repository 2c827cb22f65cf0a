#include <set>

#include "doctest.h"
#include "spancl/augment.hpp"
#include "spancl/common.hpp"
#include "spancl/synth.hpp"

using namespace spancl;

TEST_CASE("synthetic corpus shape") {
  const auto s = generate_synthetic({40, 20, 3, 7});
  CHECK(s.train.passages().size() == 40);
  CHECK(s.train.examples().size() == 40);
  CHECK(s.train.unanswerable_count() == 0);
  CHECK(s.dev.examples().size() == 20);
  CHECK(s.dev.unanswerable_count() > 0);
  CHECK(s.dev.unanswerable_count() <= 10);
  for (const auto& q : s.train.examples()) {
    CHECK(answer_matches(s.train.passage(q.passage_id).text, q.primary_answer()));
  }
  for (const auto& q : s.dev.examples()) {
    if (q.answerable) continue;
    REQUIRE_FALSE(q.plausible_answers.empty());
    CHECK(answer_matches(s.dev.passage(q.passage_id).text, q.plausible_answers.front()));
  }
}

TEST_CASE("synthetic corpus is seeded") {
  const auto a = generate_synthetic({10, 6, 2, 3});
  const auto b = generate_synthetic({10, 6, 2, 3});
  const auto c = generate_synthetic({10, 6, 2, 4});
  CHECK(to_squad_json(a.train) == to_squad_json(b.train));
  CHECK(to_squad_json(a.dev) == to_squad_json(b.dev));
  CHECK(to_squad_json(a.train) != to_squad_json(c.train));
}

TEST_CASE("synthetic questions admit paraphrases and negatives") {
  const auto s = generate_synthetic({30, 0, 3, 11});
  const LexiconAnnotator ann(s.lexicons);
  std::set<NegSource> sources;
  std::uint64_t seed = 0;
  for (const auto& q : s.train.examples()) {
    const auto neg = generate_negative(q.question, ann, s.lexicons, ++seed);
    REQUIRE(neg.has_value());
    CHECK(neg->text != q.question);
    sources.insert(neg->strategy);
  }
  CHECK(sources.size() == 3);
}

TEST_CASE("synthetic config validation") {
  CHECK_THROWS_AS(generate_synthetic({1, 1, 0, 1}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({1, 1, 17, 1}), ConfigError);
  CHECK_NOTHROW(synthetic_lexicons().validate());
}
