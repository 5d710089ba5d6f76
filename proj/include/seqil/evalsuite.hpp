#pragma once

#include <string>
#include <vector>

#include "seqil/objectives.hpp"
#include "seqil/policy.hpp"
#include "seqil/tasks.hpp"
#include "seqil/toy_mdp.hpp"

namespace seqil {

struct DiversityReport {
  double self_bleu = 0.0;
  double mean_per_token_entropy = 0.0;
  long sample_count = 0;
};

// Mean leave-one-out BLEU: each sample is scored against all the others
// as references, with uniform n-gram weights 1..max_ngram, clipped
// modified precision, and the standard brevity penalty (closest
// reference length, ties to the shorter). Any zero n-gram precision
// makes that sample score 0; there is no smoothing. Needs >= 2 samples,
// each non-empty. High values mean low diversity.
double self_bleu(const std::vector<std::vector<int>>& samples, int max_ngram = 4);

// Fraction of trajectories the task accepts.
double task_accuracy(const std::vector<Trajectory>& trajectories, const SyntheticTask& task);

// 1-based fractional ranks; tied values share the mean of their ranks.
std::vector<double> average_ranks(const std::vector<double>& xs);

// Rank correlation: Pearson correlation of the average ranks. Needs
// n >= 3 with equal lengths. When either side has zero rank variance
// the coefficient is undefined and NaN is returned with a warning.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Samples `samples_per_prompt` completions per prompt with rng streams
// derived from stream_seed, then scores accuracy over all of them,
// Self-BLEU over the completions (trailing eos stripped; NaN when fewer
// than 2 usable samples remain), and the mean per-token entropy.
struct QualityReport {
  double accuracy = 0.0;
  DiversityReport diversity;
};

QualityReport evaluate_quality(PolicyModel& model, const std::vector<std::vector<int>>& prompts,
                               const SyntheticTask& task, const SamplerConfig& sampler,
                               long samples_per_prompt, uint64_t stream_seed);

struct CorrelationReport {
  double spearman_rho = 0.0;  // NaN when undefined
  long n = 0;
  std::string metric;
};

// Samples one trajectory per prompt, pairs each recovered total return
// with the exact-match task metric, and rank-correlates the two lists.
// A zero regularization strength would make every extracted reward
// exactly zero, so extraction falls back to strength 1 in that case;
// rank correlation is invariant under positive scaling, so this only
// removes the degeneracy.
CorrelationReport reward_metric_correlation(PolicyModel& model,
                                            const std::vector<std::vector<int>>& eval_prompts,
                                            const SyntheticTask& task, const SamplerConfig& sampler,
                                            const IqlConfig& iql, Rng& rng);

struct ToyTrainConfig {
  // Tuned so the online variant's advantage on the recoverable chain is
  // visible: a small lambda keeps demonstrated-state values propped up by the
  // likelihood term, and a small gamma makes loitering in the top row costly.
  long train_steps = 15000;
  double learning_rate = 1.0;
  double lambda = 0.003;
  double gamma = 0.15;
  double alpha = 0.1;        // online mix-in
  long rollouts_per_step = 32;
  long eval_episodes = 1000;
  uint64_t seed = 1;
};

struct ToyResult {
  std::string variant;    // recoverable | non-recoverable
  std::string algorithm;  // iql-offline | iql-online
  std::vector<double> per_seed;
  double success_rate = 0.0;  // mean over seeds
  double std_error = 0.0;     // sample standard error over seeds
};

// Trains a tabular soft-Q table on the demonstrations with the offline
// or online objective and returns the learned logits [n_states, 2].
Tensor train_toy_table(const ToyMdp& mdp, bool online, const ToyTrainConfig& cfg, uint64_t seed);

// One noisy episode following softmax(table) from state 0, capped at
// the mdp horizon.
ToyEpisode rollout_toy(const ToyMdp& mdp, const Tensor& table, Rng& rng);

// Fraction of episodes that reach the goal.
double toy_success_rate(const ToyMdp& mdp, const Tensor& table, long episodes, Rng& rng);

// Both chain variants x both algorithms, each over `seeds` seeds:
// 4 aggregated results.
std::vector<ToyResult> run_toy_comparison(const ToyMdp& base_mdp, const ToyTrainConfig& cfg,
                                          long seeds);

}  // namespace seqil
