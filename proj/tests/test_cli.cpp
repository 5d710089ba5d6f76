#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// SEQIL_BIN is injected by the build: the path of the command-line tool.

namespace {

int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(SEQIL_BIN) + " " + args + " > " + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/seqil_cli_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// one tiny but real training run, shared by the checkpoint-consuming tests
const std::string& trained_run() {
  static std::string dir = [] {
    const std::string d = "/tmp/seqil_cli_shared_run";
    std::filesystem::remove_all(d);
    const int rc = run(
        "train --out-dir " + d +
            " --set task=copy --set total_steps=20 --set batch_size=4"
            " --set train_examples=16 --set val_prompts=8 --set embed_dim=8"
            " --set hidden_dim=16 --set layers=1 --set max_context=24"
            " --set max_completion=6 --set eval_every=10",
        d + ".log");
    REQUIRE(rc == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("train writes the full artifact set") {
  const std::string& dir = trained_run();
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  CHECK(std::filesystem::exists(dir + "/history.csv"));
  CHECK(std::filesystem::exists(dir + "/checkpoint.bin"));
  CHECK(std::filesystem::exists(dir + "/report.json"));
  CHECK(slurp(dir + "/manifest.json").find("\"status\": \"complete\"") != std::string::npos);
  CHECK(slurp(dir + ".log").find("done: " + dir) != std::string::npos);

  const auto rows = lines_of(slurp(dir + "/history.csv"));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0].rfind("step,", 0) == 0);
}

TEST_CASE("bad configuration is rejected before any work") {
  TempDir t("badcfg");
  CHECK(run("train --out-dir " + t.path + "/a --set no_such_knob=1", t.path + "/a.log") == 2);
  CHECK(slurp(t.path + "/a.log").find("no_such_knob") != std::string::npos);
  CHECK(!std::filesystem::exists(t.path + "/a/checkpoint.bin"));
  CHECK(run("train --out-dir " + t.path + "/b --set lambda=-1", t.path + "/b.log") == 2);
  CHECK(run("train --out-dir " + t.path + "/c --set objective=reinforce", t.path + "/c.log") == 2);
}

TEST_CASE("eval sweeps decoding settings over a checkpoint") {
  const std::string& dir = trained_run();
  TempDir t("eval");

  CHECK(run("eval --checkpoint " + dir + "/checkpoint.bin --task copy --mode greedy"
            " --prompts 8 --max-completion 6 --out " + t.path + "/greedy.csv",
            t.path + "/greedy.log") == 0);
  auto rows = lines_of(slurp(t.path + "/greedy.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] ==
        "mode,temperature,beam_size,length_penalty,accuracy,self_bleu,mean_entropy,samples");
  CHECK(rows[1].rfind("greedy,", 0) == 0);

  CHECK(run("eval --checkpoint " + dir + "/checkpoint.bin --task copy --mode sample"
            " --temps 0.5,1.0 --prompts 8 --samples-per-prompt 2 --max-completion 6"
            " --out " + t.path + "/sample.csv",
            t.path + "/sample.log") == 0);
  rows = lines_of(slurp(t.path + "/sample.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].rfind("sample,0.5,", 0) == 0);
  CHECK(rows[2].rfind("sample,1,", 0) == 0);

  CHECK(run("eval --checkpoint " + t.path + "/absent.bin --task copy", t.path + "/miss.log") == 1);
  // the checkpoint's vocabulary does not fit this task
  CHECK(run("eval --checkpoint " + dir + "/checkpoint.bin --task modular-sum",
            t.path + "/vocab.log") == 1);
  CHECK(slurp(t.path + "/vocab.log").find("vocabulary") != std::string::npos);
}

TEST_CASE("sweep fans out over the axis and merges histories") {
  TempDir t("sweep");
  const std::string common =
      " --set task=copy --set total_steps=10 --set batch_size=4"
      " --set train_examples=16 --set val_prompts=8 --set embed_dim=8"
      " --set hidden_dim=16 --set layers=1 --set max_context=24"
      " --set max_completion=6 --set eval_every=10 --set objective=iql-offline";
  CHECK(run("sweep --out-dir " + t.path + "/runs --axis lambda=0,0.1" + common,
            t.path + "/sweep.log") == 0);
  CHECK(std::filesystem::exists(t.path + "/runs/lambda=0/checkpoint.bin"));
  CHECK(std::filesystem::exists(t.path + "/runs/lambda=0.1/checkpoint.bin"));
  const auto rows = lines_of(slurp(t.path + "/runs/merged.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("lambda,step,", 0) == 0);
  CHECK(rows[1].rfind("0,", 0) == 0);
  CHECK(rows[2].rfind("0.1,", 0) == 0);

  // refuses to clobber existing run directories
  CHECK(run("sweep --out-dir " + t.path + "/runs --axis lambda=0,0.1" + common,
            t.path + "/again.log") == 2);
}

TEST_CASE("toy-mdp reports all four cells") {
  TempDir t("toy");
  CHECK(run("toy-mdp --chain-length 2 --horizon 5 --train-steps 40 --rollouts 4"
            " --eval-episodes 20 --seeds 2 --out " + t.path + "/toy.csv",
            t.path + "/toy.log") == 0);
  const auto rows = lines_of(slurp(t.path + "/toy.csv"));
  REQUIRE(rows.size() == 9);  // header + 2 variants x 2 algorithms x 2 seeds
  CHECK(rows[0] == "variant,algorithm,seed,success_rate");
  const std::string console = slurp(t.path + "/toy.log");
  CHECK(console.find("recoverable") != std::string::npos);
  CHECK(console.find("non-recoverable") != std::string::npos);
  CHECK(console.find("online - offline gap") != std::string::npos);
}

TEST_CASE("correlate ranks recovered rewards against the task metric") {
  const std::string& dir = trained_run();
  TempDir t("corr");
  CHECK(run("correlate --checkpoint " + dir + "/checkpoint.bin --task copy"
            " --prompts 8 --max-completion 6 --out " + t.path + "/corr.csv",
            t.path + "/corr.log") == 0);
  const auto rows = lines_of(slurp(t.path + "/corr.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "metric,spearman_rho,n");
  CHECK(rows[1].rfind("exact_match,", 0) == 0);
  CHECK(rows[2].rfind("total_return,", 0) == 0);
  CHECK(rows[1].substr(rows[1].size() - 2) == ",8");
}

TEST_CASE("bare invocations explain themselves") {
  TempDir t("help");
  CHECK(run("", t.path + "/bare.log") == 2);
  CHECK(run("--help", t.path + "/help.log") == 0);
  CHECK(slurp(t.path + "/help.log").find("train") != std::string::npos);
}
