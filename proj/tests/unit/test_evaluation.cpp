#include <cmath>

#include "doctest.h"
#include "spancl/common.hpp"
#include "spancl/corpus.hpp"
#include "spancl/evaluation.hpp"

using namespace spancl;

namespace {
std::string fixture(const char* name) { return std::string(SPANCL_FIXTURES) + "/" + name; }
}  // namespace

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("The Twilight Saga") == "twilight saga");
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer("2005.") == "2005");
  CHECK(normalize_answer("  An  apple, a day ") == "apple day");
}

TEST_CASE("exact_match and f1_score") {
  CHECK(exact_match("2005", {"2005"}) == 1);
  CHECK(exact_match("in 2005", {"2005"}) == 0);
  CHECK(exact_match("", {}) == 1);
  CHECK(exact_match("x", {}) == 0);
  CHECK(f1_score("in 2005", {"2005"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(f1_score("the city council", {"the city council"}) == 1.0);
  CHECK(f1_score("red car", {"blue boat"}) == 0.0);
  CHECK(f1_score("", {}) == 1.0);
  CHECK(f1_score("x", {}) == 0.0);
  CHECK(f1_score("a", {}) == 1.0);
  CHECK(f1_score("x y", {"z", "x"}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("hand-scored six-question fixture") {
  const auto dev = load_squad(fixture("eval_dev.json"));
  const auto r = evaluate(load_predictions(fixture("eval_predictions.json")), dev);
  // q1 EM 0 F1 2/3; q2 1 1; q3 1 1; q4 1 1; q5 0 0; q6 0 0
  CHECK(r.total == 6);
  CHECK(r.has_ans_total == 4);
  CHECK(r.no_ans_total == 2);
  CHECK(r.exact == 50.00);
  CHECK(r.f1 == 61.11);
  CHECK(r.has_ans_exact == 50.00);
  CHECK(r.has_ans_f1 == 66.67);
  CHECK(r.no_ans_exact == 50.00);
  CHECK(r.no_ans_f1 == 50.00);
}

TEST_CASE("perfect and all-empty predictions") {
  const auto dev = load_squad(fixture("eval_dev.json"));
  const auto perfect = evaluate(load_predictions(fixture("eval_perfect.json")), dev);
  CHECK(perfect.exact == 100.0);
  CHECK(perfect.f1 == 100.0);
  CHECK(perfect.has_ans_exact == 100.0);
  CHECK(perfect.no_ans_exact == 100.0);

  Corpus half;
  half.add_passage({"p", "", "Alpha beta."});
  half.add_example({"a", "p", "?", true, {{"Alpha", 0}}, {}});
  half.add_example({"b", "p", "?", false, {}, {}});
  const auto empty = evaluate({{"a", ""}, {"b", ""}}, half);
  CHECK(empty.exact == 50.0);
  CHECK(empty.no_ans_exact == 100.0);
  CHECK(empty.has_ans_exact == 0.0);
}

TEST_CASE("missing predictions are listed") {
  const auto dev = load_squad(fixture("eval_dev.json"));
  auto preds = load_predictions(fixture("eval_perfect.json"));
  preds.erase("q2");
  preds.erase("q5");
  try {
    evaluate(preds, dev);
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(e.missing_ids() == std::vector<std::string>{"q2", "q5"});
  }
}

TEST_CASE("report invariants") {
  const auto dev = load_squad(fixture("eval_dev.json"));
  const auto preds = load_predictions(fixture("eval_predictions.json"));
  for (const auto& ex : dev.examples()) {
    const auto golds = ex.gold_texts();
    const auto p = preds.at(ex.id);
    if (exact_match(p, golds) == 1) CHECK(f1_score(p, golds) == 1.0);
    CHECK(exact_match(p, golds) <= f1_score(p, golds));
  }
  const auto r = evaluate(preds, dev);
  const double weighted = (r.has_ans_exact * static_cast<double>(r.has_ans_total) +
                           r.no_ans_exact * static_cast<double>(r.no_ans_total)) /
                          static_cast<double>(r.total);
  CHECK(std::abs(weighted - r.exact) <= 0.01);

  const auto j = r.to_json();
  CHECK(j.at("exact") == 50.0);
  CHECK(j.at("HasAns_total") == 4);
  CHECK(EvalReport::from_json(j).f1 == r.f1);

  const std::string path = "preds_roundtrip.json";
  save_predictions(preds, path);
  CHECK(load_predictions(path) == preds);
  std::remove(path.c_str());
}
