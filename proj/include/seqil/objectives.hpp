#pragma once

#include <span>
#include <vector>

#include "seqil/model.hpp"
#include "seqil/policy.hpp"
#include "seqil/tape.hpp"
#include "seqil/toy_mdp.hpp"

namespace seqil {

// Scalar objective value plus its decomposition. Which fields are
// meaningful depends on the objective that produced it:
//   mle            total = mle_term
//   mle-ent        total = mle_term - entropy_term
//   iql-offline    total = td_term + mle_term   (td_term = lambda * mean d^2)
//   iql-online     total = td_term + mle_term   (td_term mixes expert/online)
//   gail policy    total = pg_term + value_term + kl_term + mle_term
// Each identity holds within 1e-10 by construction.
struct LossOutput {
  double total = 0.0;
  double mle_term = 0.0;
  double td_term = 0.0;
  double entropy_term = 0.0;
  double pg_term = 0.0;
  double kl_term = 0.0;
  double value_term = 0.0;
  long token_count = 0;
};

struct IqlConfig {
  double lambda = 0.1;  // TD-regularization strength
  double gamma = 1.0;   // discount; terminal successor values are 0
  double alpha = 0.0;   // online mix-in ratio; 0 selects the offline loss

  void validate() const;
};

// Vectorized per-token graph nodes for a batch of transitions. q holds
// the chosen-action logit, v the logsumexp over the state's logits
// (the soft state value), v_next the successor's value with terminal
// entries fixed at zero.
struct StepBatch {
  ad::Ref q = -1;
  ad::Ref v = -1;
  ad::Ref v_next = -1;
  ad::Ref entropies = -1;  // per-token policy entropy, when requested
  long n = 0;
};

struct BuiltLoss {
  ad::Ref node = -1;
  LossOutput out;
};

// Assembles a StepBatch from sequence trajectories (one forward pass
// per trajectory) or from toy-MDP episodes over a tabular logit matrix
// of shape [n_states, n_actions].
StepBatch seq_step_batch(ad::Graph& g, PolicyModel& model, std::span<const Trajectory> batch,
                         bool want_entropy = false);
StepBatch tab_step_batch(ad::Graph& g, ad::Parameter& logits_table,
                         std::span<const ToyEpisode> batch, bool want_entropy = false);

// Loss graphs over an assembled StepBatch. These are shared by the
// sequence and tabular paths.
BuiltLoss combine_mle(ad::Graph& g, const StepBatch& expert);
BuiltLoss combine_entropy_mle(ad::Graph& g, const StepBatch& expert, double lambda);
BuiltLoss combine_iql_offline(ad::Graph& g, const StepBatch& expert, const IqlConfig& cfg);
BuiltLoss combine_iql_online(ad::Graph& g, const StepBatch& expert, const StepBatch& online,
                             const IqlConfig& cfg);

// Evaluation-only wrappers (values, no gradient).
LossOutput mle_loss(PolicyModel& model, std::span<const Trajectory> batch);
LossOutput entropy_regularized_mle_loss(PolicyModel& model, std::span<const Trajectory> batch,
                                        double lambda);
LossOutput iqlearn_offline_loss(PolicyModel& model, std::span<const Trajectory> batch,
                                const IqlConfig& cfg);
LossOutput iqlearn_online_loss(PolicyModel& model, std::span<const Trajectory> expert_batch,
                               std::span<const Trajectory> online_batch, const IqlConfig& cfg);

// Implicit per-step rewards recovered from the logits-as-Q view:
// r_t = lambda * (logits(s_t)[a_t] - gamma * v(s_{t+1})), terminal
// successors contributing zero.
struct RewardTrace {
  std::vector<double> per_step;
  double total_return = 0.0;  // plain sum of per_step
  Trajectory trajectory;
};

RewardTrace extract_rewards(PolicyModel& model, const Trajectory& traj, const IqlConfig& cfg);
RewardTrace extract_rewards_table(const Tensor& logits_table, const ToyEpisode& episode,
                                  const IqlConfig& cfg);

// ---- Adversarial objective ----

// Scores for the states a trajectory's completion visits (the prefix
// after each generated token).
std::vector<double> discriminator_scores(SequenceModel& disc, const Trajectory& traj);

// softplus(score): strictly positive, monotone shaped reward.
double gail_reward(double score);

// Binary cross-entropy with expert states labeled 1 and generated
// states labeled 0, pooled mean over all scored states.
BuiltLoss build_gail_discriminator_loss(ad::Graph& g, SequenceModel& disc,
                                        std::span<const Trajectory> expert,
                                        std::span<const Trajectory> generated);
double gail_discriminator_loss(SequenceModel& disc, std::span<const Trajectory> expert,
                               std::span<const Trajectory> generated);
double gail_discriminator_accuracy(SequenceModel& disc, std::span<const Trajectory> expert,
                                   std::span<const Trajectory> generated);

struct GailRollout {
  Trajectory traj;
  std::vector<double> rewards;  // one shaped reward per completion token
};

GailRollout make_gail_rollout(SequenceModel& disc, Trajectory traj);

std::vector<double> discounted_returns(const GailRollout& rollout, double gamma);

// Standardized advantages (zero mean, unit variance across the batch;
// the rescaling is skipped when the variance vanishes). Computed
// without a graph: advantages enter the policy loss as constants, the
// usual actor-critic stop-gradient.
std::vector<double> gail_advantages(SequenceModel& value_net, std::span<const GailRollout> rollouts,
                                    double gamma);

// total = -mean[adv * log pi] + kl_weight * mean KL(pi || pi_init)
//       + mean (V(s_t) - R_t)^2 + mle_weight * mle(expert_batch)
BuiltLoss build_gail_policy_loss(ad::Graph& g, PolicyModel& model, SequenceModel& value_net,
                                 PolicyModel& initial_model, std::span<const GailRollout> rollouts,
                                 std::span<const double> advantages,
                                 std::span<const Trajectory> expert_batch, double kl_weight,
                                 double mle_weight, double gamma);
LossOutput gail_policy_loss(std::span<const GailRollout> rollouts, SequenceModel& value_net,
                            double kl_weight, double mle_weight, PolicyModel& initial_model,
                            PolicyModel& model, std::span<const Trajectory> expert_batch,
                            double gamma);

}  // namespace seqil
