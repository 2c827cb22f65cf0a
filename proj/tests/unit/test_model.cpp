#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "spancl/common.hpp"
#include "spancl/model.hpp"

using namespace spancl;

TEST_CASE("checkpoint round trip is bit-exact") {
  auto p = ModelParams::init(testing::tiny_config(), 9);
  p.classifier.w.setConstant(0.125);
  const nlohmann::json meta{{"note", "x"}, {"epoch", 3}};
  const std::string path = "model_roundtrip.ckpt";
  save_checkpoint(p, 0xfeedbeefcafe1234ULL, meta, path);
  const auto ck = load_checkpoint(path);
  CHECK(ck.vocab_hash == 0xfeedbeefcafe1234ULL);
  CHECK(ck.metadata == meta);
  CHECK(ck.params.config == p.config);
  CHECK(ck.params.flatten() == p.flatten());

  // Resaving the loaded model reproduces the same bytes.
  const std::string again = "model_roundtrip2.ckpt";
  save_checkpoint(ck.params, ck.vocab_hash, ck.metadata, again);
  CHECK(read_file(path) == read_file(again));
  std::remove(again.c_str());

  auto bytes = read_file(path);
  write_file(path, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  bytes[0] = 'X';
  write_file(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("flatten and unflatten are inverse") {
  auto p = ModelParams::init(testing::tiny_config(), 1);
  const auto flat = p.flatten();
  CHECK(flat.size() == p.parameter_count());
  auto q = p.zeros_like();
  q.unflatten(flat);
  CHECK(q.flatten() == flat);
  CHECK_THROWS_AS(q.unflatten(std::vector<double>(3)), InputError);
  CHECK(p.all_finite());
}

TEST_CASE("finite-difference check of a constant loss") {
  const auto p = ModelParams::init(testing::tiny_config(), 1);
  const LossAndGrad constant = [](const ModelParams&, ModelParams&) { return 4.0; };
  const auto r = finite_difference_check(constant, p);
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.passed);
  CHECK(r.checked > 0);

  const LossAndGrad broken = [](const ModelParams&, ModelParams&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_difference_check(broken, p), Error);
}

TEST_CASE("finite-difference check catches a wrong gradient") {
  const auto p = ModelParams::init(testing::tiny_config(), 1);
  const LossAndGrad sq = [](const ModelParams& m, ModelParams& g) {
    g.head.w_start = 3.0 * m.head.w_start;  // true gradient is 2 * w
    return m.head.w_start.squaredNorm();
  };
  GradCheckOptions o;
  o.coordinates = 200;
  const auto r = finite_difference_check(sq, p, o);
  CHECK_FALSE(r.passed);
  CHECK(r.worst_coordinate.find("span_head.w_start") == 0);
}
