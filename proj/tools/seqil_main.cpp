#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqil/checkpoint.hpp"
#include "seqil/evalsuite.hpp"
#include "seqil/trainer.hpp"

namespace {

using json = nlohmann::json;
using seqil::ExperimentConfig;
using seqil::Rng;

std::string fmt(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

std::string hash_hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string rho_or_na(double rho) { return std::isnan(rho) ? "n/a" : fmt(rho); }

class PhaseTimer {
 public:
  void start(const std::string& phase) {
    finish();
    phase_ = phase;
    begin_ = std::chrono::steady_clock::now();
  }
  void finish() {
    if (phase_.empty()) return;
    const auto elapsed = std::chrono::steady_clock::now() - begin_;
    timings_[phase_] =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    phase_.clear();
  }
  const std::map<std::string, long long>& timings() const { return timings_; }

 private:
  std::string phase_;
  std::chrono::steady_clock::time_point begin_;
  std::map<std::string, long long> timings_;
};

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + path);
}

json manifest_skeleton(const ExperimentConfig& cfg) {
  json m;
  m["config"] = cfg.to_map();
  m["config_hash"] = hash_hex(cfg.content_hash());
  m["artifacts"] = {{"checkpoint", "checkpoint.bin"},
                    {"history", "history.csv"},
                    {"report", "report.json"}};
  m["status"] = "running";
  m["timings_ms"] = json::object();
  return m;
}

// Trains one experiment into out_dir: manifest.json before any work,
// then history.csv/checkpoint.bin during training, then report.json and
// the finalized manifest.
seqil::TrainHistory run_training(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  json manifest = manifest_skeleton(cfg);
  write_json(out_dir + "/manifest.json", manifest);

  PhaseTimer timer;
  timer.start("setup");
  seqil::TrainSetup setup = seqil::prepare_setup(cfg);
  seqil::PolicyModel policy(setup.task.vocab, cfg.model(), cfg.seed);

  timer.start("train");
  seqil::TrainOptions opts;
  opts.out_dir = out_dir;
  seqil::TrainHistory history = seqil::train(cfg, setup, policy, opts);
  timer.finish();

  json report;
  report["config_hash"] = manifest["config_hash"];
  report["records"] = history.records.size();
  if (!history.records.empty()) {
    const seqil::EvalRecord& last = history.records.back();
    report["final"] = {{"step", last.step},
                       {"loss_total", last.loss.total},
                       {"mle_term", last.loss.mle_term},
                       {"td_term", last.loss.td_term},
                       {"entropy_term", last.loss.entropy_term},
                       {"pg_term", last.loss.pg_term},
                       {"kl_term", last.loss.kl_term},
                       {"value_term", last.loss.value_term},
                       {"val_accuracy", last.val_accuracy},
                       {"self_bleu", last.self_bleu},
                       {"mean_entropy", last.mean_entropy}};
  }
  write_json(out_dir + "/report.json", report);

  for (const auto& [phase, ms] : timer.timings()) manifest["timings_ms"][phase] = ms;
  manifest["status"] = "complete";
  write_json(out_dir + "/manifest.json", manifest);
  return history;
}

ExperimentConfig load_config_with_overrides(const std::string& config_path,
                                            const std::vector<std::string>& sets) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                             : ExperimentConfig::from_file(config_path);
  for (const std::string& s : sets) {
    const auto [key, value] = seqil::split_assignment(s);
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& sets) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_with_overrides(config_path, sets);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const seqil::TrainHistory history = run_training(cfg, out_dir);
    for (const seqil::EvalRecord& r : history.records)
      std::cout << "step " << r.step << "  loss " << fmt(r.loss.total) << "  val_accuracy "
                << fmt(r.val_accuracy) << '\n';
    std::cout << "done: " << out_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

struct LoadedPolicy {
  seqil::SyntheticTask task;
  seqil::PolicyModel policy;
};

LoadedPolicy load_policy_checkpoint(const std::string& path, const std::string& task_name,
                                    long prompt_symbols, long max_completion) {
  const seqil::LoadedCheckpoint peek = seqil::peek_checkpoint(path);
  seqil::SyntheticTask task =
      seqil::make_task(seqil::task_kind_from_name(task_name), static_cast<int>(prompt_symbols));
  task.max_completion = static_cast<int>(max_completion);
  if (peek.config.head_width != peek.config.vocab_size)
    throw std::runtime_error(path + " is not a policy checkpoint (head width " +
                             std::to_string(peek.config.head_width) + ")");
  if (peek.config.vocab_size != static_cast<long>(task.vocab.size()))
    throw std::runtime_error("checkpoint vocabulary size " +
                             std::to_string(peek.config.vocab_size) + " does not match task '" +
                             task_name + "' (" + std::to_string(task.vocab.size()) + ")");
  seqil::PolicyModel policy(task.vocab, peek.config, peek.meta.seed);
  seqil::load_checkpoint(path, policy.net);
  return {std::move(task), std::move(policy)};
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

int cmd_eval(const std::string& ckpt, const std::string& task_name, long prompt_symbols,
             long max_completion, long n_prompts, long samples_per_prompt,
             const std::string& temps_text, const std::string& mode, long beam_size,
             double length_penalty, uint64_t seed, const std::string& out_path) {
  try {
    LoadedPolicy lp = load_policy_checkpoint(ckpt, task_name, prompt_symbols, max_completion);
    const std::vector<std::vector<int>> prompts =
        seqil::gen_prompts(lp.task, static_cast<int>(n_prompts), seed);

    std::vector<seqil::SamplerConfig> settings;
    if (mode == "sample") {
      for (double t : parse_double_list(temps_text)) {
        seqil::SamplerConfig sc;
        sc.mode = seqil::DecodeMode::sample;
        sc.temperature = t;
        sc.max_len = static_cast<int>(max_completion);
        settings.push_back(sc);
      }
    } else {
      seqil::SamplerConfig sc;
      sc.mode = seqil::decode_mode_from_name(mode);
      sc.max_len = static_cast<int>(max_completion);
      sc.beam_size = static_cast<int>(beam_size);
      sc.length_penalty = length_penalty;
      settings.push_back(sc);
    }

    std::ostringstream csv;
    csv << "mode,temperature,beam_size,length_penalty,accuracy,self_bleu,mean_entropy,samples\n";
    for (size_t i = 0; i < settings.size(); ++i) {
      const seqil::SamplerConfig& sc = settings[i];
      const seqil::QualityReport q =
          seqil::evaluate_quality(lp.policy, prompts, lp.task, sc, samples_per_prompt,
                                  seqil::derive_seed(seed, "eval-sweep", i));
      csv << seqil::decode_mode_name(sc.mode) << ',' << fmt(sc.temperature) << ',' << sc.beam_size
          << ',' << fmt(sc.length_penalty) << ',' << fmt(q.accuracy) << ','
          << fmt(q.diversity.self_bleu) << ',' << fmt(q.diversity.mean_per_token_entropy) << ','
          << q.diversity.sample_count << '\n';
    }
    std::cout << csv.str();
    if (!out_path.empty()) {
      std::ofstream os(out_path, std::ios::trunc);
      os << csv.str();
      if (!os) throw std::runtime_error("cannot write " + out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::string& axis,
              const std::vector<std::string>& sets) {
  ExperimentConfig base;
  std::string axis_key;
  std::vector<std::string> axis_values;
  try {
    base = load_config_with_overrides(config_path, sets);
    const auto [key, list] = seqil::split_assignment(axis);
    axis_key = key;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const size_t a = item.find_first_not_of(" \t");
      const size_t b = item.find_last_not_of(" \t");
      if (a == std::string::npos) throw std::invalid_argument("empty axis value");
      axis_values.push_back(item.substr(a, b - a + 1));
    }
    if (axis_values.empty()) throw std::invalid_argument("axis needs at least one value");

    std::set<std::string> dirs;
    for (const std::string& v : axis_values) {
      const std::string dir = out_dir + "/" + axis_key + "=" + v;
      if (!dirs.insert(dir).second)
        throw std::invalid_argument("axis values map to the same directory " + dir);
      if (std::filesystem::exists(dir))
        throw std::invalid_argument("run directory already exists: " + dir);
      // Type-check the assignment (and reject unknown keys) up front.
      ExperimentConfig probe = base;
      probe.set(axis_key, v);
      probe.validate();
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    // Sort rows by numeric axis value when every value parses, else
    // lexicographically.
    std::vector<size_t> order(axis_values.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    bool numeric = true;
    std::vector<double> parsed(axis_values.size());
    for (size_t i = 0; i < axis_values.size(); ++i) {
      try {
        size_t used = 0;
        parsed[i] = std::stod(axis_values[i], &used);
        numeric = numeric && used == axis_values[i].size();
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return numeric ? parsed[a] < parsed[b] : axis_values[a] < axis_values[b];
    });

    std::ostringstream merged;
    merged << axis_key << ',' << seqil::TrainHistory::csv_header() << '\n';
    for (size_t idx : order) {
      const std::string& value = axis_values[idx];
      ExperimentConfig cfg = base;
      cfg.set(axis_key, value);
      const std::string dir = out_dir + "/" + axis_key + "=" + value;
      std::cout << "run " << axis_key << "=" << value << " -> " << dir << '\n';
      const seqil::TrainHistory history = run_training(cfg, dir);
      std::istringstream rows(history.to_csv());
      std::string line;
      std::getline(rows, line);  // drop the header
      while (std::getline(rows, line))
        if (!line.empty()) merged << value << ',' << line << '\n';
    }
    const std::string merged_path = out_dir + "/merged.csv";
    std::ofstream os(merged_path, std::ios::trunc);
    os << merged.str();
    if (!os) throw std::runtime_error("cannot write " + merged_path);
    std::cout << "merged: " << merged_path << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_toymdp(long chain_length, double noise, long horizon, double goal_reward, long seeds,
               long train_steps, double learning_rate, double lambda, double gamma, double alpha,
               long rollouts, long eval_episodes, uint64_t seed, const std::string& out_path) {
  try {
    seqil::ToyMdp mdp;
    mdp.chain_length = static_cast<int>(chain_length);
    mdp.noise = noise;
    mdp.horizon = static_cast<int>(horizon);
    mdp.goal_reward = goal_reward;

    seqil::ToyTrainConfig tcfg;
    tcfg.train_steps = train_steps;
    tcfg.learning_rate = learning_rate;
    tcfg.lambda = lambda;
    tcfg.gamma = gamma;
    tcfg.alpha = alpha;
    tcfg.rollouts_per_step = rollouts;
    tcfg.eval_episodes = eval_episodes;
    tcfg.seed = seed;

    const std::vector<seqil::ToyResult> results = seqil::run_toy_comparison(mdp, tcfg, seeds);

    std::ostringstream csv;
    csv << "variant,algorithm,seed,success_rate\n";
    for (const seqil::ToyResult& r : results)
      for (size_t s = 0; s < r.per_seed.size(); ++s)
        csv << r.variant << ',' << r.algorithm << ',' << s << ',' << fmt(r.per_seed[s]) << '\n';
    if (!out_path.empty()) {
      std::ofstream os(out_path, std::ios::trunc);
      os << csv.str();
      if (!os) throw std::runtime_error("cannot write " + out_path);
    }

    std::printf("%-16s %-12s %10s %10s\n", "variant", "algorithm", "success", "stderr");
    for (const seqil::ToyResult& r : results)
      std::printf("%-16s %-12s %10.4f %10.4f\n", r.variant.c_str(), r.algorithm.c_str(),
                  r.success_rate, r.std_error);
    for (size_t i = 0; i + 1 < results.size(); i += 2) {
      const seqil::ToyResult& off = results[i];
      const seqil::ToyResult& on = results[i + 1];
      std::printf("%-16s online - offline gap %+.4f (combined stderr %.4f)\n", off.variant.c_str(),
                  on.success_rate - off.success_rate, on.std_error + off.std_error);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_correlate(const std::string& ckpt, const std::string& task_name, long prompt_symbols,
                  long max_completion, long n_prompts, double temperature, double lambda,
                  double gamma, uint64_t seed, const std::string& out_path) {
  try {
    LoadedPolicy lp = load_policy_checkpoint(ckpt, task_name, prompt_symbols, max_completion);
    const std::vector<std::vector<int>> prompts =
        seqil::gen_prompts(lp.task, static_cast<int>(n_prompts), seed);
    seqil::SamplerConfig sampler;
    sampler.mode = seqil::DecodeMode::sample;
    sampler.temperature = temperature;
    sampler.max_len = static_cast<int>(max_completion);
    const seqil::IqlConfig iql{lambda, gamma, 0.0};

    std::ostringstream rows;
    rows << "metric,spearman_rho,n\n";

    Rng rng_match(seqil::derive_seed(seed, "correlate-match"));
    const seqil::CorrelationReport match =
        seqil::reward_metric_correlation(lp.policy, prompts, lp.task, sampler, iql, rng_match);
    rows << match.metric << ',' << rho_or_na(match.spearman_rho) << ',' << match.n << '\n';

    // Self-correlation control row: the recovered returns against
    // themselves.
    Rng rng_self(seqil::derive_seed(seed, "correlate-self"));
    seqil::IqlConfig extraction = iql;
    if (extraction.lambda == 0.0) extraction.lambda = 1.0;
    std::vector<double> returns;
    for (const auto& prompt : prompts) {
      seqil::Trajectory traj = seqil::decode(lp.policy, prompt, sampler, &rng_self);
      returns.push_back(seqil::extract_rewards(lp.policy, traj, extraction).total_return);
    }
    rows << "total_return," << rho_or_na(seqil::spearman(returns, returns)) << ','
         << returns.size() << '\n';

    std::cout << rows.str();
    if (!out_path.empty()) {
      std::ofstream os(out_path, std::ios::trunc);
      os << rows.str();
      if (!os) throw std::runtime_error("cannot write " + out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imitation-learning laboratory for autoregressive sequence models"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train one experiment into a run directory");
  std::string train_config, train_out = "run";
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "experiment config file (key = value lines)");
  train->add_option("--out-dir", train_out, "run directory")->capture_default_str();
  train->add_option("--set", train_sets, "override, e.g. --set lambda=0.5");

  // eval
  auto* eval = app.add_subcommand("eval", "sweep decoding settings for a trained checkpoint");
  std::string eval_ckpt, eval_task = "copy", eval_temps = "1.0", eval_mode = "sample";
  std::string eval_out;
  long eval_prompt_symbols = 4, eval_max_completion = 64, eval_prompts = 64, eval_spp = 1;
  long eval_beam = 4;
  double eval_lp = 0.6;
  uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--task", eval_task, "task name")->capture_default_str();
  eval->add_option("--prompt-symbols", eval_prompt_symbols)->capture_default_str();
  eval->add_option("--max-completion", eval_max_completion)->capture_default_str();
  eval->add_option("--prompts", eval_prompts, "validation prompts")->capture_default_str();
  eval->add_option("--samples-per-prompt", eval_spp)->capture_default_str();
  eval->add_option("--temps", eval_temps, "comma-separated temperatures")->capture_default_str();
  eval->add_option("--mode", eval_mode, "sample | greedy | beam")->capture_default_str();
  eval->add_option("--beam-size", eval_beam)->capture_default_str();
  eval->add_option("--length-penalty", eval_lp)->capture_default_str();
  eval->add_option("--seed", eval_seed)->capture_default_str();
  eval->add_option("--out", eval_out, "also write the CSV here");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  std::string sweep_config, sweep_out = "sweep", sweep_axis;
  std::vector<std::string> sweep_sets;
  sweep->add_option("--config", sweep_config, "base config file");
  sweep->add_option("--out-dir", sweep_out)->capture_default_str();
  sweep->add_option("--axis", sweep_axis, "e.g. --axis lambda=0,0.05,0.1,0.5,1.0")->required();
  sweep->add_option("--set", sweep_sets, "override applied before the axis");

  // toy-mdp
  auto* toy = app.add_subcommand("toy-mdp", "offline vs online comparison on the chain task");
  long toy_chain = 5, toy_horizon = 8, toy_seeds = 3, toy_steps = 15000, toy_rollouts = 32;
  long toy_episodes = 1000;
  double toy_noise = 0.1, toy_goal = 1.0, toy_lr = 1.0, toy_lambda = 0.003, toy_gamma = 0.15;
  double toy_alpha = 0.1;
  uint64_t toy_seed = 1;
  std::string toy_out;
  toy->add_option("--chain-length", toy_chain)->capture_default_str();
  toy->add_option("--noise", toy_noise)->capture_default_str();
  toy->add_option("--horizon", toy_horizon)->capture_default_str();
  toy->add_option("--goal-reward", toy_goal)->capture_default_str();
  toy->add_option("--seeds", toy_seeds)->capture_default_str();
  toy->add_option("--train-steps", toy_steps)->capture_default_str();
  toy->add_option("--learning-rate", toy_lr)->capture_default_str();
  toy->add_option("--lambda", toy_lambda)->capture_default_str();
  toy->add_option("--gamma", toy_gamma)->capture_default_str();
  toy->add_option("--alpha", toy_alpha)->capture_default_str();
  toy->add_option("--rollouts", toy_rollouts)->capture_default_str();
  toy->add_option("--eval-episodes", toy_episodes)->capture_default_str();
  toy->add_option("--seed", toy_seed)->capture_default_str();
  toy->add_option("--out", toy_out, "per-seed CSV path");

  // correlate
  auto* corr = app.add_subcommand("correlate", "rank-correlate recovered rewards with the metric");
  std::string corr_ckpt, corr_task = "modular-sum", corr_out;
  long corr_prompt_symbols = 3, corr_max_completion = 64, corr_prompts = 64;
  double corr_temp = 1.0, corr_lambda = 0.1, corr_gamma = 1.0;
  uint64_t corr_seed = 1;
  corr->add_option("--checkpoint", corr_ckpt, "checkpoint file")->required();
  corr->add_option("--task", corr_task)->capture_default_str();
  corr->add_option("--prompt-symbols", corr_prompt_symbols)->capture_default_str();
  corr->add_option("--max-completion", corr_max_completion)->capture_default_str();
  corr->add_option("--prompts", corr_prompts)->capture_default_str();
  corr->add_option("--temperature", corr_temp)->capture_default_str();
  corr->add_option("--lambda", corr_lambda, "reward extraction strength")->capture_default_str();
  corr->add_option("--gamma", corr_gamma)->capture_default_str();
  corr->add_option("--seed", corr_seed)->capture_default_str();
  corr->add_option("--out", corr_out, "also write the rows here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (train->parsed()) return cmd_train(train_config, train_out, train_sets);
  if (eval->parsed())
    return cmd_eval(eval_ckpt, eval_task, eval_prompt_symbols, eval_max_completion, eval_prompts,
                    eval_spp, eval_temps, eval_mode, eval_beam, eval_lp, eval_seed, eval_out);
  if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out, sweep_axis, sweep_sets);
  if (toy->parsed())
    return cmd_toymdp(toy_chain, toy_noise, toy_horizon, toy_goal, toy_seeds, toy_steps, toy_lr,
                      toy_lambda, toy_gamma, toy_alpha, toy_rollouts, toy_episodes, toy_seed,
                      toy_out);
  if (corr->parsed())
    return cmd_correlate(corr_ckpt, corr_task, corr_prompt_symbols, corr_max_completion,
                         corr_prompts, corr_temp, corr_lambda, corr_gamma, corr_seed, corr_out);
  return 2;
}
