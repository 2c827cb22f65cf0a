#include "spancl/evaluation.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "spancl/common.hpp"
#include "spancl/corpus.hpp"

namespace spancl {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& g : gold) ++counts[g];
  int same = 0;
  for (const auto& p : pred) {
    auto it = counts.find(p);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(same) / static_cast<double>(gold.size());
  return 2 * precision * recall / (precision + recall);
}

/// Unanswerable questions are scored against the single empty answer.
std::vector<std::string> effective_golds(const std::vector<std::string>& gold_answers) {
  std::vector<std::string> out;
  for (const auto& g : gold_answers) {
    if (!normalize_answer(g).empty()) out.push_back(g);
  }
  if (out.empty()) out.emplace_back();
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (unsigned char c : text) {
    if (is_ascii_punct(c)) continue;
    s.push_back(static_cast<char>(std::tolower(c)));
  }
  std::string out;
  for (const auto& w : split_ws(s)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& gold_answers) {
  const auto p = normalize_answer(prediction);
  for (const auto& g : effective_golds(gold_answers)) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

double f1_score(std::string_view prediction, const std::vector<std::string>& gold_answers) {
  const auto p = split_ws(normalize_answer(prediction));
  double best = 0.0;
  for (const auto& g : effective_golds(gold_answers)) {
    best = std::max(best, token_f1(p, split_ws(normalize_answer(g))));
  }
  return best;
}

nlohmann::json EvalReport::to_json() const {
  return {{"exact", exact},
          {"f1", f1},
          {"total", total},
          {"HasAns_exact", has_ans_exact},
          {"HasAns_f1", has_ans_f1},
          {"HasAns_total", has_ans_total},
          {"NoAns_exact", no_ans_exact},
          {"NoAns_f1", no_ans_f1},
          {"NoAns_total", no_ans_total}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.exact = j.at("exact").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.total = j.at("total").get<std::size_t>();
  r.has_ans_exact = j.value("HasAns_exact", 0.0);
  r.has_ans_f1 = j.value("HasAns_f1", 0.0);
  r.has_ans_total = j.value("HasAns_total", std::size_t{0});
  r.no_ans_exact = j.value("NoAns_exact", 0.0);
  r.no_ans_f1 = j.value("NoAns_f1", 0.0);
  r.no_ans_total = j.value("NoAns_total", std::size_t{0});
  return r;
}

EvalReport evaluate(const Predictions& predictions, const Corpus& dev) {
  std::vector<std::string> missing;
  for (const auto& ex : dev.examples()) {
    if (!predictions.contains(ex.id)) missing.push_back(ex.id);
  }
  if (!missing.empty()) {
    std::string msg = "missing predictions for " + std::to_string(missing.size()) + " question(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw EvaluationError(msg, std::move(missing));
  }

  double em_has = 0, f1_has = 0, em_no = 0, f1_no = 0;
  EvalReport r;
  for (const auto& ex : dev.examples()) {
    const auto& pred = predictions.at(ex.id);
    const auto golds = ex.answerable ? ex.gold_texts() : std::vector<std::string>{};
    const double em = exact_match(pred, golds);
    const double f1 = f1_score(pred, golds);
    if (ex.answerable) {
      em_has += em;
      f1_has += f1;
      ++r.has_ans_total;
    } else {
      em_no += em;
      f1_no += f1;
      ++r.no_ans_total;
    }
  }
  r.total = r.has_ans_total + r.no_ans_total;
  auto pct = [](double sum, std::size_t n) { return n == 0 ? 0.0 : round2(100.0 * sum / static_cast<double>(n)); };
  r.exact = pct(em_has + em_no, r.total);
  r.f1 = pct(f1_has + f1_no, r.total);
  r.has_ans_exact = pct(em_has, r.has_ans_total);
  r.has_ans_f1 = pct(f1_has, r.has_ans_total);
  r.no_ans_exact = pct(em_no, r.no_ans_total);
  r.no_ans_f1 = pct(f1_no, r.no_ans_total);
  return r;
}

Predictions load_predictions(const std::string& path) {
  const auto text = read_file(path);
  try {
    return nlohmann::json::parse(text).get<Predictions>();
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": predictions must map question ids to strings (" + e.what() + ")");
  }
}

void save_predictions(const Predictions& predictions, const std::string& path) {
  write_file(path, nlohmann::json(predictions).dump(2) + "\n");
}

}  // namespace spancl
