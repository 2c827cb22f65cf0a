#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace spancl {

class Corpus;

/// Lowercase, strip ASCII punctuation, drop articles, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// Gold answers of an unanswerable question are the empty list.
int exact_match(std::string_view prediction, const std::vector<std::string>& gold_answers);
double f1_score(std::string_view prediction, const std::vector<std::string>& gold_answers);

struct EvalReport {
  double exact = 0;
  double f1 = 0;
  double has_ans_exact = 0;
  double has_ans_f1 = 0;
  double no_ans_exact = 0;
  double no_ans_f1 = 0;
  std::size_t total = 0;
  std::size_t has_ans_total = 0;
  std::size_t no_ans_total = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

using Predictions = std::map<std::string, std::string>;

EvalReport evaluate(const Predictions& predictions, const Corpus& dev);

Predictions load_predictions(const std::string& path);
void save_predictions(const Predictions& predictions, const std::string& path);

}  // namespace spancl
