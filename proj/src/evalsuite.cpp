#include "seqil/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "seqil/optimizer.hpp"
#include "seqil/tape.hpp"

namespace seqil {

namespace {

using NgramCounts = std::map<std::vector<int>, long>;

NgramCounts count_ngrams(const std::vector<int>& tokens, int n) {
  NgramCounts counts;
  const long last = static_cast<long>(tokens.size()) - n;
  for (long i = 0; i <= last; ++i) {
    std::vector<int> gram(tokens.begin() + i, tokens.begin() + i + n);
    ++counts[std::move(gram)];
  }
  return counts;
}

// Two largest per-sample counts of each n-gram across the corpus, so
// the leave-one-out reference maximum is a lookup: it is max1 unless
// the candidate itself is the sole holder of max1.
struct TopTwo {
  long max1 = 0;
  long max2 = 0;
  long holder = -1;
};

}  // namespace

double self_bleu(const std::vector<std::vector<int>>& samples, int max_ngram) {
  const long s = static_cast<long>(samples.size());
  if (s < 2) throw std::invalid_argument("self_bleu: needs at least 2 samples");
  if (max_ngram < 1) throw std::invalid_argument("self_bleu: max_ngram must be >= 1");
  for (const auto& sample : samples)
    if (sample.empty()) throw std::invalid_argument("self_bleu: samples must be non-empty");

  std::vector<std::vector<NgramCounts>> counts(s);
  std::vector<std::map<std::vector<int>, TopTwo>> tops(max_ngram);
  for (long i = 0; i < s; ++i) {
    counts[i].reserve(max_ngram);
    for (int n = 1; n <= max_ngram; ++n) {
      counts[i].push_back(count_ngrams(samples[i], n));
      for (const auto& [gram, c] : counts[i].back()) {
        TopTwo& t = tops[n - 1][gram];
        if (c > t.max1) {
          t.max2 = t.max1;
          t.max1 = c;
          t.holder = i;
        } else if (c > t.max2) {
          t.max2 = c;
        }
      }
    }
  }

  std::vector<long> lengths(s);
  for (long i = 0; i < s; ++i) lengths[i] = static_cast<long>(samples[i].size());

  double total = 0.0;
  for (long i = 0; i < s; ++i) {
    const long c = lengths[i];
    // Closest reference length; ties go to the shorter reference.
    long r = -1;
    for (long j = 0; j < s; ++j) {
      if (j == i) continue;
      if (r < 0 || std::abs(lengths[j] - c) < std::abs(r - c) ||
          (std::abs(lengths[j] - c) == std::abs(r - c) && lengths[j] < r))
        r = lengths[j];
    }

    double log_precision = 0.0;
    bool zero = false;
    for (int n = 1; n <= max_ngram && !zero; ++n) {
      const long denom = c - n + 1;
      if (denom <= 0) {
        zero = true;
        break;
      }
      long matched = 0;
      for (const auto& [gram, cnt] : counts[i][n - 1]) {
        const TopTwo& t = tops[n - 1].at(gram);
        const long ref_max = (t.holder == i) ? t.max2 : t.max1;
        matched += std::min(cnt, ref_max);
      }
      if (matched == 0) {
        zero = true;
        break;
      }
      log_precision += std::log(static_cast<double>(matched) / static_cast<double>(denom));
    }
    if (zero) continue;  // contributes 0
    const double brevity = (c >= r) ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
    total += brevity * std::exp(log_precision / max_ngram);
  }
  return total / static_cast<double>(s);
}

double task_accuracy(const std::vector<Trajectory>& trajectories, const SyntheticTask& task) {
  if (trajectories.empty()) throw std::invalid_argument("task_accuracy: no trajectories");
  long hits = 0;
  for (const Trajectory& t : trajectories) hits += task.check(t) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(trajectories.size());
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const long n = static_cast<long>(xs.size());
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](long a, long b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  long i = 0;
  while (i < n) {
    long j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    // Positions i..j (0-based) share the mean of ranks i+1..j+1.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (long k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  const long n = static_cast<long>(xs.size());
  if (n < 3) throw std::invalid_argument("spearman: needs at least 3 pairs");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  double mx = 0.0, my = 0.0;
  for (long i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (long i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    std::cerr << "spearman: zero rank variance, coefficient undefined\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  return sxy / std::sqrt(sxx * syy);
}

QualityReport evaluate_quality(PolicyModel& model, const std::vector<std::vector<int>>& prompts,
                               const SyntheticTask& task, const SamplerConfig& sampler,
                               long samples_per_prompt, uint64_t stream_seed) {
  if (prompts.empty()) throw std::invalid_argument("evaluate_quality: no prompts");
  if (samples_per_prompt < 1)
    throw std::invalid_argument("evaluate_quality: samples_per_prompt must be >= 1");
  std::vector<Trajectory> trajectories;
  trajectories.reserve(prompts.size() * samples_per_prompt);
  for (long i = 0; i < static_cast<long>(prompts.size()); ++i) {
    for (long k = 0; k < samples_per_prompt; ++k) {
      Rng rng(derive_seed(stream_seed, "eval-sample",
                          static_cast<uint64_t>(i) * samples_per_prompt + k));
      trajectories.push_back(decode(model, prompts[i], sampler, &rng));
    }
  }

  QualityReport report;
  report.accuracy = task_accuracy(trajectories, task);
  report.diversity.sample_count = static_cast<long>(trajectories.size());

  double entropy_sum = 0.0;
  std::vector<std::vector<int>> bodies;
  for (const Trajectory& t : trajectories) {
    entropy_sum += mean_completion_entropy(model, t);
    std::vector<int> body = t.completion;
    if (!body.empty() && body.back() == model.vocab.eos_id) body.pop_back();
    if (!body.empty()) bodies.push_back(std::move(body));
  }
  report.diversity.mean_per_token_entropy = entropy_sum / trajectories.size();
  report.diversity.self_bleu = bodies.size() >= 2
                                   ? self_bleu(bodies)
                                   : std::numeric_limits<double>::quiet_NaN();
  return report;
}

CorrelationReport reward_metric_correlation(PolicyModel& model,
                                            const std::vector<std::vector<int>>& eval_prompts,
                                            const SyntheticTask& task, const SamplerConfig& sampler,
                                            const IqlConfig& iql, Rng& rng) {
  if (eval_prompts.size() < 3)
    throw std::invalid_argument("reward_metric_correlation: needs at least 3 prompts");
  IqlConfig extraction = iql;
  if (extraction.lambda == 0.0) extraction.lambda = 1.0;
  std::vector<double> returns, metric;
  for (const auto& prompt : eval_prompts) {
    Trajectory traj = decode(model, prompt, sampler, &rng);
    returns.push_back(extract_rewards(model, traj, extraction).total_return);
    metric.push_back(task.check(traj) ? 1.0 : 0.0);
  }
  CorrelationReport report;
  report.metric = "exact_match";
  report.n = static_cast<long>(returns.size());
  report.spearman_rho = spearman(returns, metric);
  return report;
}

Tensor train_toy_table(const ToyMdp& mdp, bool online, const ToyTrainConfig& cfg, uint64_t seed) {
  mdp.validate();
  if (cfg.train_steps < 1) throw std::invalid_argument("train_toy_table: train_steps must be >= 1");
  IqlConfig iql{cfg.lambda, cfg.gamma, online ? cfg.alpha : 0.0};
  iql.validate();

  ad::Parameter table{"toy_table", Tensor::zeros({mdp.n_states(), mdp.n_actions()})};
  AdamConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  Adam opt(opt_cfg, {&table});
  const std::vector<ToyEpisode> demos = toy_demonstrations(mdp, 1);

  for (long k = 1; k <= cfg.train_steps; ++k) {
    ad::Graph g;
    StepBatch expert = tab_step_batch(g, table, demos);
    BuiltLoss built;
    if (online) {
      Rng roll(derive_seed(seed, "toy-roll", static_cast<uint64_t>(k)));
      std::vector<ToyEpisode> rollouts;
      for (long i = 0; i < cfg.rollouts_per_step; ++i)
        rollouts.push_back(rollout_toy(mdp, table.value, roll));
      StepBatch on = tab_step_batch(g, table, rollouts);
      built = combine_iql_online(g, expert, on, iql);
    } else {
      built = combine_iql_offline(g, expert, iql);
    }
    g.backward(built.node);
    opt.step({&table});
  }
  return table.value;
}

ToyEpisode rollout_toy(const ToyMdp& mdp, const Tensor& table, Rng& rng) {
  ToyEpisode episode;
  int state = 0;
  for (int t = 0; t < mdp.horizon; ++t) {
    const double l0 = table.at(state, 0);
    const double l1 = table.at(state, 1);
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    const double probs[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
    const int action = static_cast<int>(rng.categorical(std::span<const double>(probs, 2)));
    const ToyMdp::Outcome out = mdp.step(state, action, rng);
    episode.steps.push_back({state, action, out.next_state, out.terminal});
    episode.total_reward += out.reward;
    state = out.next_state;
    if (out.terminal) {
      episode.reached_goal = mdp.is_goal(state);
      break;
    }
  }
  return episode;
}

double toy_success_rate(const ToyMdp& mdp, const Tensor& table, long episodes, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("toy_success_rate: episodes must be >= 1");
  long hits = 0;
  for (long i = 0; i < episodes; ++i) hits += rollout_toy(mdp, table, rng).reached_goal ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(episodes);
}

std::vector<ToyResult> run_toy_comparison(const ToyMdp& base_mdp, const ToyTrainConfig& cfg,
                                          long seeds) {
  if (seeds < 1) throw std::invalid_argument("run_toy_comparison: needs at least 1 seed");
  std::vector<ToyResult> results;
  for (bool recoverable : {true, false}) {
    ToyMdp mdp = base_mdp;
    mdp.recoverable = recoverable;
    for (bool online : {false, true}) {
      ToyResult r;
      r.variant = recoverable ? "recoverable" : "non-recoverable";
      r.algorithm = online ? "iql-online" : "iql-offline";
      for (long s = 0; s < seeds; ++s) {
        const uint64_t seed = derive_seed(cfg.seed, "toy-seed", static_cast<uint64_t>(s));
        const Tensor table = train_toy_table(mdp, online, cfg, seed);
        Rng eval_rng(derive_seed(seed, "toy-eval"));
        r.per_seed.push_back(toy_success_rate(mdp, table, cfg.eval_episodes, eval_rng));
      }
      double mean = 0.0;
      for (double v : r.per_seed) mean += v;
      mean /= static_cast<double>(r.per_seed.size());
      double var = 0.0;
      for (double v : r.per_seed) var += (v - mean) * (v - mean);
      r.success_rate = mean;
      r.std_error = r.per_seed.size() > 1
                        ? std::sqrt(var / (r.per_seed.size() - 1.0) / r.per_seed.size())
                        : 0.0;
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace seqil
