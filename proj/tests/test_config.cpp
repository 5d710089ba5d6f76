#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "seqil/config.hpp"

using namespace seqil;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/seqil_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("defaults validate and expose derived configs") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.iql().lambda == cfg.lambda);
  CHECK(cfg.iql().gamma == cfg.gamma);
  CHECK(cfg.model().embed_dim == cfg.embed_dim);
  CHECK(cfg.model().layers == cfg.layers);
  CHECK(cfg.eval_sampler().temperature == cfg.eval_temperature);
  CHECK(cfg.eval_sampler().mode == DecodeMode::sample);
}

TEST_CASE("serialize and parse are inverse") {
  ExperimentConfig cfg;
  cfg.objective = "iql-online";
  cfg.task = "multi-reference";
  cfg.lambda = 0.25;
  cfg.total_steps = 1234;
  cfg.seed = 99;
  cfg.eval_mode = "beam";
  cfg.resume = true;

  ExperimentConfig back = ExperimentConfig::from_map(cfg.to_map());
  CHECK(back.serialize() == cfg.serialize());
  CHECK(back.content_hash() == cfg.content_hash());
  CHECK(back.lambda == cfg.lambda);
  CHECK(back.resume == cfg.resume);
}

TEST_CASE("from_file reads what serialize wrote") {
  ExperimentConfig cfg;
  cfg.objective = "gail";
  cfg.kl_weight_final = 0.5;
  cfg.warmup_mle_steps = 10;
  TempFile f("config_roundtrip.cfg");
  {
    std::ofstream os(f.path);
    os << cfg.serialize();
  }
  ExperimentConfig back = ExperimentConfig::from_file(f.path);
  CHECK(back.content_hash() == cfg.content_hash());
  CHECK(back.objective == "gail");
  CHECK(back.kl_weight_final == 0.5);

  CHECK_THROWS(ExperimentConfig::from_file("/tmp/seqil_test_absent.cfg"));
}

TEST_CASE("set applies assignments and rejects unknown keys loudly") {
  ExperimentConfig cfg;
  cfg.set("lambda", "0.75");
  CHECK(cfg.lambda == 0.75);
  cfg.set("objective", "iql-offline");
  CHECK(cfg.objective == "iql-offline");
  cfg.set("batch_size", "8");
  CHECK(cfg.batch_size == 8);

  try {
    cfg.set("lambdaa", "0.5");
    FAIL("expected a throw");
  } catch (const std::exception& e) {
    // the error enumerates the valid keys so typos are easy to fix
    std::string msg = e.what();
    CHECK(msg.find("lambda") != std::string::npos);
    CHECK(msg.find("batch_size") != std::string::npos);
  }
  CHECK_THROWS(cfg.set("total_steps", "not-a-number"));
}

TEST_CASE("every valid key can be set from its serialized value") {
  ExperimentConfig cfg;
  auto kv = cfg.to_map();
  for (const std::string& key : ExperimentConfig::valid_keys()) {
    REQUIRE(kv.count(key) == 1);
    CHECK_NOTHROW(cfg.set(key, kv.at(key)));
  }
  CHECK(cfg.content_hash() == ExperimentConfig{}.content_hash());
}

TEST_CASE("content hash tracks values, not assignment order") {
  ExperimentConfig a;
  a.set("lambda", "0.3");
  a.set("gamma", "0.9");
  ExperimentConfig b;
  b.set("gamma", "0.9");
  b.set("lambda", "0.3");
  CHECK(a.content_hash() == b.content_hash());

  b.set("lambda", "0.30001");
  CHECK(a.content_hash() != b.content_hash());
}

TEST_CASE("validation rejects bad values") {
  auto broken = [](auto mutate) {
    ExperimentConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS(broken([](auto& c) { c.objective = "reinforce"; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.task = "summarize"; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.lambda = -0.1; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.gamma = 1.5; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.alpha = 1.0; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.batch_size = 0; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.total_steps = 0; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.subset_percent = 0; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.subset_percent = 101; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.eval_mode = "nucleus"; }).validate());
  CHECK_THROWS(broken([](auto& c) { c.learning_rate = 0.0; }).validate());
}

TEST_CASE("split_assignment parses key=value with optional spaces") {
  auto [k1, v1] = split_assignment("lambda=0.5");
  CHECK(k1 == "lambda");
  CHECK(v1 == "0.5");
  auto [k2, v2] = split_assignment("task = multi-reference");
  CHECK(k2 == "task");
  CHECK(v2 == "multi-reference");
  CHECK_THROWS(split_assignment("no-equals-here"));
  CHECK_THROWS(split_assignment("=value"));
}
