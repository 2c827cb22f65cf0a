#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "spancl/cli.hpp"
#include "spancl/evaluation.hpp"

using namespace spancl;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return std::string(SPANCL_FIXTURES) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spancl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli: evaluate the perfect fixture") {
  const auto dir = scratch("eval");
  const auto r = run({"evaluate", "--data", fixture("eval_dev.json"), "--predictions", fixture("eval_perfect.json"),
                      "--out", (dir / "report.json").string()});
  REQUIRE(r.code == kExitOk);
  const auto report = EvalReport::from_json(nlohmann::json::parse(slurp(dir / "report.json")));
  CHECK(report.exact == 100.0);
  CHECK(report.f1 == 100.0);
  CHECK(report.total == 6);
}

TEST_CASE("cli: evaluate the mixed fixture") {
  const auto r = run({"evaluate", "--data", fixture("eval_dev.json"), "--predictions", fixture("eval_predictions.json")});
  REQUIRE(r.code == kExitOk);
  const auto report = EvalReport::from_json(nlohmann::json::parse(r.out));
  CHECK(report.exact == doctest::Approx(50.0));
  CHECK(report.f1 == doctest::Approx(61.1111).epsilon(1e-4));
}

TEST_CASE("cli: usage errors exit 2, failures exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"evaluate", "--bogus"}).code == kExitUsage);
  CHECK(run({"evaluate", "--data", fixture("eval_dev.json")}).code == kExitUsage);
  CHECK(run({"evaluate", "--data", "/nonexistent.json", "--predictions", fixture("eval_perfect.json")}).code ==
        kExitUsage);
  CHECK(run({"train", "--data", fixture("eval_dev.json"), "--triples", fixture("eval_dev.json"), "--out-dir", "x",
             "--scheme", "sideways"})
            .code == kExitUsage);

  const auto dir = scratch("fail");
  std::ofstream(dir / "bad.json") << "{\"version\": \"v2.0\", \"data\": [";
  const auto bad = run({"evaluate", "--data", (dir / "bad.json").string(), "--predictions", fixture("eval_perfect.json")});
  CHECK(bad.code == kExitFailure);
  CHECK(bad.err.rfind("error: ", 0) == 0);

  // Predictions missing a dev id
  std::ofstream(dir / "partial.json") << R"({"q1": "2005"})";
  CHECK(run({"evaluate", "--data", fixture("eval_dev.json"), "--predictions", (dir / "partial.json").string()}).code ==
        kExitFailure);
}

TEST_CASE("cli: help shows defaults") {
  const auto r = run({"train", "--help"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("--lambda2") != std::string::npos);
  CHECK(r.out.find("0.05") != std::string::npos);
  CHECK(r.out.find("joint") != std::string::npos);
  CHECK(run({"--help"}).out.find("sweep-tau") != std::string::npos);
}

TEST_CASE("cli: synth, augment, train, predict, evaluate") {
  const auto dir = scratch("pipeline");
  const auto d = dir.string();
  REQUIRE(run({"synth", "--out-dir", d, "--train-passages", "24", "--dev-passages", "10", "--seed", "5"}).code ==
          kExitOk);
  const auto aug = run({"augment", "--data", d + "/train.json", "--lexicons", d + "/lexicons.json", "--out",
                        d + "/triples.jsonl", "--stats", d + "/stats.json"});
  REQUIRE(aug.code == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "stats.json")).at("emitted") == 24);

  const std::vector<std::string> common{"--data", d + "/train.json", "--triples", d + "/triples.jsonl", "--dev",
                                        d + "/dev.json", "--hidden", "8", "--layers", "1", "--heads", "2",
                                        "--epochs", "1", "--batch-size", "4"};
  auto train_args = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"train", "--out-dir", out};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  const auto with_cl = run(train_args(d + "/cl", {}));
  REQUIRE(with_cl.code == kExitOk);
  const auto without = run(train_args(d + "/base", {"--lambda2", "0"}));
  REQUIRE(without.code == kExitOk);
  for (const char* f : {"model.ckpt", "vocab.txt", "train_log.jsonl", "epochs.json", "config.json"}) {
    CHECK(fs::exists(dir / "cl" / f));
  }
  CHECK(slurp(dir / "cl/model.ckpt") != slurp(dir / "base/model.ckpt"));
  CHECK(nlohmann::json::parse(slurp(dir / "base/config.json")).at("lambda2") == 0.0);

  REQUIRE(run({"predict", "--checkpoint", d + "/cl/model.ckpt", "--data", d + "/dev.json", "--out", d + "/preds.json"})
              .code == kExitOk);
  const auto ev = run({"evaluate", "--data", d + "/dev.json", "--predictions", d + "/preds.json"});
  REQUIRE(ev.code == kExitOk);
  CHECK(EvalReport::from_json(nlohmann::json::parse(ev.out)).total == 10);

  // Vocabulary from the other run's corpus still matches, so use a mangled one.
  std::ofstream(dir / "wrong_vocab.txt") << "[PAD]\n[UNK]\n";
  CHECK(run({"predict", "--checkpoint", d + "/cl/model.ckpt", "--vocab", d + "/wrong_vocab.txt", "--data",
             d + "/dev.json", "--out", d + "/p2.json"})
            .code == kExitFailure);
}
