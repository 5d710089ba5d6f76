#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "seqil/checkpoint.hpp"
#include "seqil/rng.hpp"

using namespace seqil;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/seqil_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.vocab_size = 6;
  cfg.head_width = 6;
  cfg.max_context = 12;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 8;
  cfg.layers = 1;
  return cfg;
}

void scramble(SequenceModel& model, uint64_t seed) {
  Rng rng(seed);
  for (ad::Parameter* p : model.parameters())
    for (double& x : p->value.data) x = rng.normal();
}

std::vector<double> flatten(const SequenceModel& model) {
  std::vector<double> all;
  for (const ad::Parameter* p : model.parameters())
    all.insert(all.end(), p->value.data.begin(), p->value.data.end());
  return all;
}

}  // namespace

TEST_CASE("checkpoint round-trips parameters and metadata bit-exactly") {
  TempFile f("ckpt_roundtrip.bin");
  SequenceModel a(small_config(), 61);
  scramble(a, 100);
  save_checkpoint(f.path, a, {.step = 123, .seed = 61});

  SequenceModel b(small_config(), 999);  // different init, same shape
  CheckpointMeta meta = load_checkpoint(f.path, b);
  CHECK(meta.step == 123);
  CHECK(meta.seed == 61);
  CHECK(flatten(a) == flatten(b));

  std::vector<int> tokens = {1, 3, 4, 2};
  CHECK(a.forward_values(tokens).data == b.forward_values(tokens).data);
}

TEST_CASE("peek reads the header without a model") {
  TempFile f("ckpt_peek.bin");
  ModelConfig cfg = small_config();
  SequenceModel m(cfg, 62);
  save_checkpoint(f.path, m, {.step = 9, .seed = 62});

  LoadedCheckpoint info = peek_checkpoint(f.path);
  CHECK(info.meta.step == 9);
  CHECK(info.config.vocab_size == cfg.vocab_size);
  CHECK(info.config.embed_dim == cfg.embed_dim);
  CHECK(info.config.layers == cfg.layers);
  CHECK_FALSE(info.has_optimizer);
}

TEST_CASE("optimizer state round-trips and resumes the exact trajectory") {
  TempFile f("ckpt_opt.bin");
  AdamConfig ocfg;
  ocfg.learning_rate = 0.01;

  auto fake_grads = [](SequenceModel& m, uint64_t step) {
    Rng rng(derive_seed(777, "g", step));
    for (ad::Parameter* p : m.parameters())
      for (double& x : p->grad.data) x = rng.normal();
  };

  // continuous reference: 8 steps
  SequenceModel ref(small_config(), 63);
  Adam ref_opt(ocfg, ref.parameters());
  for (uint64_t k = 0; k < 8; ++k) {
    fake_grads(ref, k);
    ref_opt.step(ref.parameters());
  }

  // checkpointed run: 4 steps, save, reload, 4 more
  SequenceModel run(small_config(), 63);
  Adam opt(ocfg, run.parameters());
  for (uint64_t k = 0; k < 4; ++k) {
    fake_grads(run, k);
    opt.step(run.parameters());
  }
  save_checkpoint(f.path, run, {.step = 4, .seed = 63}, &opt);
  CHECK(peek_checkpoint(f.path).has_optimizer);

  SequenceModel resumed(small_config(), 0);
  Adam ropt(ocfg, resumed.parameters());
  CheckpointMeta meta = load_checkpoint(f.path, resumed, &ropt);
  CHECK(meta.step == 4);
  CHECK(ropt.step_count() == 4);
  for (uint64_t k = 4; k < 8; ++k) {
    fake_grads(resumed, k);
    ropt.step(resumed.parameters());
  }
  CHECK(flatten(ref) == flatten(resumed));
}

TEST_CASE("loading into a mismatched architecture fails and leaves the model alone") {
  TempFile f("ckpt_arch.bin");
  SequenceModel src(small_config(), 64);
  scramble(src, 200);
  save_checkpoint(f.path, src, {});

  ModelConfig other = small_config();
  other.embed_dim = 6;
  SequenceModel dst(other, 65);
  std::vector<double> before = flatten(dst);
  CHECK_THROWS(load_checkpoint(f.path, dst));
  CHECK(flatten(dst) == before);

  // asking for optimizer state the file does not have also fails
  SequenceModel ok(small_config(), 66);
  AdamConfig ocfg;
  Adam opt(ocfg, ok.parameters());
  CHECK_THROWS(load_checkpoint(f.path, ok, &opt));
}

TEST_CASE("corrupt files are rejected") {
  TempFile f("ckpt_bad.bin");

  {
    std::ofstream os(f.path, std::ios::binary);
    os << "not a checkpoint at all";
  }
  SequenceModel m(small_config(), 67);
  CHECK_THROWS(load_checkpoint(f.path, m));
  CHECK_THROWS(peek_checkpoint(f.path));

  // truncated real checkpoint
  save_checkpoint(f.path, m, {});
  std::ifstream is(f.path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  {
    std::ofstream os(f.path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<long>(bytes.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(f.path, m));

  CHECK_THROWS(load_checkpoint("/tmp/seqil_test_missing_ckpt.bin", m));
}
