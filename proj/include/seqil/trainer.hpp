#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "seqil/config.hpp"
#include "seqil/objectives.hpp"
#include "seqil/optimizer.hpp"
#include "seqil/policy.hpp"
#include "seqil/tasks.hpp"

namespace seqil {

// One row of the training history, appended at every eval point.
struct EvalRecord {
  long step = 0;
  LossOutput loss;            // decomposition of the latest training loss
  double val_accuracy = 0.0;
  double self_bleu = 0.0;     // NaN when fewer than 2 usable samples
  double mean_entropy = 0.0;  // mean per-token entropy of eval samples
};

struct TrainHistory {
  std::vector<EvalRecord> records;

  static const char* csv_header();
  std::string to_csv() const;
  static TrainHistory from_csv_file(const std::string& path);
};

// Handed to the observer after every optimizer step. `objective` names
// the loss actually evaluated, so warm-up steps report "mle" whatever
// the configured objective is.
struct StepInfo {
  long step = 0;
  std::string objective;
  LossOutput loss;
  double kl_weight = 0.0;  // adversarial phase only
  long disc_updates = 0;   // cumulative discriminator updates
};
using StepObserver = std::function<void(const StepInfo&)>;

// Holds recent policy rollouts. Entries are stamped with the step that
// produced them; sampling never serves anything staler than the bound
// (0 keeps strictly on-policy data: only the current step's rollouts).
class RolloutBuffer {
 public:
  explicit RolloutBuffer(long capacity, long staleness = 0);

  // Advances the clock to `step` and evicts entries that fell out of
  // the staleness window.
  void begin_step(long step);
  void push(Trajectory traj);

  long size() const { return static_cast<long>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  // Uniform draw over the fresh entries.
  const Trajectory& sample(Rng& rng) const;

 private:
  struct Entry {
    Trajectory traj;
    long step = 0;
  };
  long capacity_;
  long staleness_;
  long step_ = 0;
  std::deque<Entry> entries_;
};

// Splits batch_size slots between the expert dataset and the rollout
// buffer with an independent Bernoulli(alpha) per slot. Expert slots
// are uniform draws from the dataset. alpha > 0 requires a non-empty
// buffer. Either side of the pair may come back empty.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> assemble_online_batch(
    const std::vector<Trajectory>& dataset, const RolloutBuffer& buffer, double alpha,
    long batch_size, Rng& rng);

// Everything train() consumes besides the config: the task definition,
// the expert demonstrations, and held-out prompts for evaluation.
struct TrainSetup {
  SyntheticTask task;
  std::vector<Trajectory> dataset;
  std::vector<std::vector<int>> val_prompts;
};

// Builds the setup the config describes: generates the dataset (or
// loads cfg.train_data), keeps the leading subset_percent of it, and
// samples distinct validation prompts.
TrainSetup prepare_setup(const ExperimentConfig& cfg);

struct TrainOptions {
  std::string out_dir;    // when set, history.csv and checkpoint.bin live here
  StepObserver observer;  // optional per-step callback
};

// Adversarial-phase state: the frozen warm-up snapshot anchoring the KL
// term, the value and discriminator heads, and their optimizers. The
// policy and value network share one optimizer and update together.
struct GailState {
  PolicyModel initial;
  SequenceModel value_net;
  SequenceModel discriminator;
  Adam policy_opt;
  Adam disc_opt;
  long disc_updates = 0;
  long saturated_steps = 0;  // consecutive steps at discriminator accuracy 1
  bool saturation_warned = false;

  GailState(const ExperimentConfig& cfg, PolicyModel& policy);
};

// One adversarial step at global step `step`: fresh rollouts from the
// current policy scored by the current discriminator, one policy+value
// update with the KL weight annealed from 0 to kl_weight_final over
// kl_anneal_steps (clock starts when the warm-up ends), then exactly
// one discriminator update. A discriminator pinned at accuracy 1.0 for
// 500 consecutive steps triggers a warning, never an abort.
LossOutput gail_train_step(const ExperimentConfig& cfg, PolicyModel& policy, GailState& state,
                           const std::vector<Trajectory>& dataset, long step);

// Runs the configured schedule: warmup_mle_steps of plain MLE, then the
// configured objective until total_steps. Deterministic given the
// config: batches are a pure function of the step index and every
// random consumer draws from its own derived stream, so changing
// eval_every never perturbs the parameter trajectory, and resuming from
// a checkpoint reproduces the uninterrupted run exactly (offline
// objectives and iql-online with staleness 0; adversarial runs cannot
// resume because the discriminator and value state are not
// checkpointed). A non-finite loss aborts with the step and the full
// decomposition in the message.
TrainHistory train(const ExperimentConfig& cfg, const TrainSetup& setup, PolicyModel& policy,
                   const TrainOptions& opts = {});

}  // namespace seqil
