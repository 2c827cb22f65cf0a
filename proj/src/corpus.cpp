#include "spancl/corpus.hpp"

#include <fstream>
#include <sstream>

#include "spancl/common.hpp"

namespace spancl {

std::vector<std::string> QAExample::gold_texts() const {
  std::vector<std::string> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.push_back(a.text);
  return out;
}

bool answer_matches(std::string_view text, const Answer& answer) {
  return utf8::substr(text, answer.char_start, utf8::length(answer.text)) == answer.text;
}

void Corpus::add_passage(Passage p) {
  if (p.text.empty()) throw ValidationError("passage " + p.id + " has empty text");
  if (passage_index_.contains(p.id)) throw ValidationError("duplicate passage id: " + p.id);
  passage_index_.emplace(p.id, passages_.size());
  passages_.push_back(std::move(p));
}

void Corpus::add_example(QAExample ex) {
  if (example_index_.contains(ex.id)) throw ValidationError("duplicate question id: " + ex.id);
  auto pit = passage_index_.find(ex.passage_id);
  if (pit == passage_index_.end()) {
    throw ValidationError("question " + ex.id + " refers to unknown passage " + ex.passage_id);
  }
  const auto& text = passages_[pit->second].text;
  if (ex.answerable && ex.answers.empty()) {
    throw ValidationError("answerable question " + ex.id + " has no answers");
  }
  if (!ex.answerable && !ex.answers.empty()) {
    throw ValidationError("unanswerable question " + ex.id + " lists answers");
  }
  for (const auto* list : {&ex.answers, &ex.plausible_answers}) {
    for (const auto& a : *list) {
      if (!answer_matches(text, a)) {
        throw ValidationError("question " + ex.id + ": answer \"" + a.text + "\" does not occur at char " +
                              std::to_string(a.char_start));
      }
    }
  }
  example_index_.emplace(ex.id, examples_.size());
  examples_.push_back(std::move(ex));
}

const Passage& Corpus::passage(const std::string& id) const {
  auto it = passage_index_.find(id);
  if (it == passage_index_.end()) throw ValidationError("unknown passage id: " + id);
  return passages_[it->second];
}

const QAExample* Corpus::find_example(const std::string& id) const {
  auto it = example_index_.find(id);
  return it == example_index_.end() ? nullptr : &examples_[it->second];
}

std::size_t Corpus::answerable_count() const {
  std::size_t n = 0;
  for (const auto& e : examples_) n += e.answerable ? 1 : 0;
  return n;
}

std::size_t Corpus::unanswerable_count() const { return examples_.size() - answerable_count(); }

namespace {

std::vector<Answer> parse_answers(const nlohmann::json& qa, const char* key) {
  std::vector<Answer> out;
  if (!qa.contains(key)) return out;
  for (const auto& a : qa.at(key)) {
    const auto start = a.at("answer_start").get<long long>();
    if (start < 0) throw ValidationError("negative answer_start");
    out.push_back({a.at("text").get<std::string>(), static_cast<std::size_t>(start)});
  }
  return out;
}

nlohmann::json answers_json(const std::vector<Answer>& answers) {
  auto arr = nlohmann::json::array();
  for (const auto& a : answers) arr.push_back({{"text", a.text}, {"answer_start", a.char_start}});
  return arr;
}

}  // namespace

Corpus parse_squad(std::string_view json_text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed SQuAD JSON at byte ") + std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }
  Corpus corpus;
  try {
    if (root.contains("version")) corpus.version = root["version"].get<std::string>();
    const auto& data = root.at("data");
    for (std::size_t a = 0; a < data.size(); ++a) {
      const auto& article = data[a];
      const auto title = article.value("title", std::string{});
      const auto& paragraphs = article.at("paragraphs");
      for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const auto& para = paragraphs[p];
        Passage passage;
        passage.id = para.contains("id") ? para["id"].get<std::string>()
                                         : std::to_string(a) + "-" + std::to_string(p);
        passage.title = title;
        passage.text = para.at("context").get<std::string>();
        const auto pid = passage.id;
        corpus.add_passage(std::move(passage));
        for (const auto& qa : para.at("qas")) {
          QAExample ex;
          ex.id = qa.at("id").get<std::string>();
          ex.passage_id = pid;
          ex.question = qa.at("question").get<std::string>();
          ex.answerable = !qa.value("is_impossible", false);
          ex.answers = parse_answers(qa, "answers");
          ex.plausible_answers = parse_answers(qa, "plausible_answers");
          corpus.add_example(std::move(ex));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("SQuAD structure error: ") + e.what());
  }
  return corpus;
}

Corpus load_squad(const std::string& path) { return parse_squad(read_file(path)); }

nlohmann::json to_squad_json(const Corpus& corpus) {
  std::unordered_map<std::string, std::vector<const QAExample*>> by_passage;
  for (const auto& e : corpus.examples()) by_passage[e.passage_id].push_back(&e);

  nlohmann::json data = nlohmann::json::array();
  for (const auto& p : corpus.passages()) {
    if (data.empty() || data.back()["title"] != p.title) {
      data.push_back({{"title", p.title}, {"paragraphs", nlohmann::json::array()}});
    }
    nlohmann::json qas = nlohmann::json::array();
    for (const auto* e : by_passage[p.id]) {
      nlohmann::json qa{{"id", e->id},
                        {"question", e->question},
                        {"is_impossible", !e->answerable},
                        {"answers", answers_json(e->answers)}};
      if (!e->plausible_answers.empty()) qa["plausible_answers"] = answers_json(e->plausible_answers);
      qas.push_back(std::move(qa));
    }
    data.back()["paragraphs"].push_back({{"id", p.id}, {"context", p.text}, {"qas", std::move(qas)}});
  }
  return {{"version", corpus.version}, {"data", std::move(data)}};
}

void save_squad(const Corpus& corpus, const std::string& path) { write_file(path, to_squad_json(corpus).dump()); }

nlohmann::json to_json(const ContrastiveTriple& t) {
  return {{"question_id", t.question_id},
          {"passage_id", t.passage_id},
          {"q_org", t.q_org},
          {"q_pos", t.q_pos},
          {"q_neg", t.q_neg},
          {"answer_text", t.answer_text},
          {"answer_char_start", t.answer_char_start},
          {"neg_source", to_string(t.neg_source)},
          {"pos_provenance", t.pos_provenance}};
}

ContrastiveTriple triple_from_json(const nlohmann::json& j) {
  ContrastiveTriple t;
  t.question_id = j.value("question_id", std::string{});
  t.passage_id = j.at("passage_id").get<std::string>();
  t.q_org = j.at("q_org").get<std::string>();
  t.q_pos = j.at("q_pos").get<std::string>();
  t.q_neg = j.at("q_neg").get<std::string>();
  t.answer_text = j.at("answer_text").get<std::string>();
  t.answer_char_start = j.at("answer_char_start").get<std::size_t>();
  t.neg_source = neg_source_from_string(j.at("neg_source").get<std::string>());
  t.pos_provenance = j.value("pos_provenance", std::string("offline"));
  return t;
}

void save_triples_jsonl(const std::vector<ContrastiveTriple>& triples, const std::string& path) {
  std::string out;
  for (const auto& t : triples) {
    out += to_json(t).dump();
    out += '\n';
  }
  write_file(path, out);
}

namespace {

template <typename F>
void for_each_jsonl(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), line_offset + e.byte);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<ContrastiveTriple> load_triples_jsonl(const std::string& path) {
  std::vector<ContrastiveTriple> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(triple_from_json(j)); });
  return out;
}

void validate_triple(const ContrastiveTriple& t, const Corpus& corpus) {
  const auto& p = corpus.passage(t.passage_id);
  if (t.q_org == t.q_pos) throw ValidationError("triple " + t.question_id + ": q_pos equals q_org");
  if (t.q_org == t.q_neg) throw ValidationError("triple " + t.question_id + ": q_neg equals q_org");
  if (!answer_matches(p.text, {t.answer_text, t.answer_char_start})) {
    throw ValidationError("triple " + t.question_id + ": answer span does not match the passage");
  }
}

std::map<std::string, std::string> load_external_negatives(const std::string& path) {
  std::map<std::string, std::string> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) {
    out[j.at("question_id").get<std::string>()] = j.at("q_neg").get<std::string>();
  });
  return out;
}

NegativePairing pair_dataset_negatives(const Corpus& corpus) {
  std::unordered_map<std::string, std::vector<const QAExample*>> unanswerable_by_passage;
  for (const auto& e : corpus.examples()) {
    if (!e.answerable && !e.plausible_answers.empty()) unanswerable_by_passage[e.passage_id].push_back(&e);
  }
  std::unordered_map<std::string, bool> used;
  NegativePairing pairing;
  for (const auto& e : corpus.examples()) {
    if (!e.answerable) continue;
    auto it = unanswerable_by_passage.find(e.passage_id);
    if (it == unanswerable_by_passage.end()) continue;
    const auto& gold = e.primary_answer();
    for (const auto* u : it->second) {
      if (used[u->id]) continue;
      if (u->plausible_answers.front() == gold) {
        used[u->id] = true;
        pairing[e.id] = u->id;
        break;
      }
    }
  }
  return pairing;
}

nlohmann::json TripleBuildStats::to_json() const {
  return {{"answerable", answerable},
          {"emitted", emitted},
          {"skipped_no_paraphrase", skipped_no_paraphrase},
          {"skipped_no_negative", skipped_no_negative},
          {"translator_fallbacks", translator_fallbacks},
          {"per_source", per_source}};
}

TripleBuildResult build_triples(const Corpus& corpus, const Augmenter& augmenter,
                                const NegativePairing& pairing,
                                const std::map<std::string, std::string>* external) {
  if (augmenter.lexicons == nullptr || augmenter.annotator == nullptr || augmenter.translator == nullptr ||
      augmenter.fallback == nullptr) {
    throw ConfigError("augmenter is not fully configured");
  }
  TripleBuildResult result;
  auto& stats = result.stats;
  for (const auto& ex : corpus.examples()) {
    if (!ex.answerable) continue;
    ++stats.answerable;

    const auto candidates = backtranslate_candidates(ex.question, *augmenter.translator, *augmenter.fallback);
    if (candidates.used_fallback) ++stats.translator_fallbacks;
    auto paraphrase = select_paraphrase(ex.question, candidates.candidates);
    if (!paraphrase) {
      ++stats.skipped_no_paraphrase;
      continue;
    }

    std::optional<NegativeQuestion> negative;
    if (auto it = pairing.find(ex.id); it != pairing.end()) {
      const auto* u = corpus.find_example(it->second);
      if (u != nullptr && u->question != ex.question) negative = NegativeQuestion{u->question, NegSource::Dataset};
    }
    if (!negative && external != nullptr) {
      if (auto it = external->find(ex.id); it != external->end() && it->second != ex.question) {
        negative = NegativeQuestion{it->second, NegSource::External};
      }
    }
    if (!negative) {
      negative = generate_negative(ex.question, *augmenter.annotator, *augmenter.lexicons,
                                   derive_seed(augmenter.seed, "negative:" + ex.id));
    }
    if (!negative) {
      ++stats.skipped_no_negative;
      continue;
    }

    ContrastiveTriple t;
    t.question_id = ex.id;
    t.passage_id = ex.passage_id;
    t.q_org = ex.question;
    t.q_pos = std::move(*paraphrase);
    t.q_neg = std::move(negative->text);
    t.answer_text = ex.primary_answer().text;
    t.answer_char_start = ex.primary_answer().char_start;
    t.neg_source = negative->strategy;
    t.pos_provenance =
        (augmenter.translator != augmenter.fallback && !candidates.used_fallback) ? "translator" : "offline";
    ++stats.per_source[to_string(t.neg_source)];
    result.triples.push_back(std::move(t));
    ++stats.emitted;
  }
  return result;
}

}  // namespace spancl
