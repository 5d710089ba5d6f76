#include "seqil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "seqil/checkpoint.hpp"
#include "seqil/evalsuite.hpp"
#include "seqil/tape.hpp"

namespace seqil {

namespace {

std::string fmt(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

void check_finite_loss(long step, const LossOutput& out) {
  if (std::isfinite(out.total) && std::isfinite(out.mle_term) && std::isfinite(out.td_term) &&
      std::isfinite(out.entropy_term) && std::isfinite(out.pg_term) && std::isfinite(out.kl_term) &&
      std::isfinite(out.value_term))
    return;
  std::ostringstream os;
  os << "train: non-finite loss at step " << step << " (total=" << out.total
     << " mle=" << out.mle_term << " td=" << out.td_term << " entropy=" << out.entropy_term
     << " pg=" << out.pg_term << " kl=" << out.kl_term << " value=" << out.value_term
     << " tokens=" << out.token_count << ")";
  throw std::runtime_error(os.str());
}

// Deterministic shuffled epoch stream: the permutation of epoch e
// depends only on (seed, e), so the batch at step k is a pure function
// of k and a resumed run replays the exact same examples.
class EpochShuffle {
 public:
  EpochShuffle(long n, uint64_t seed) : n_(n), seed_(seed) {}

  long at(long global_index) {
    const long epoch = global_index / n_;
    if (epoch != cached_epoch_) rebuild(epoch);
    return perm_[global_index % n_];
  }

 private:
  void rebuild(long epoch) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), 0L);
    Rng rng(derive_seed(seed_, "shuffle", static_cast<uint64_t>(epoch)));
    for (long i = n_ - 1; i > 0; --i) {
      const long j = rng.uniform_int(i + 1);
      std::swap(perm_[i], perm_[j]);
    }
    cached_epoch_ = epoch;
  }

  long n_;
  uint64_t seed_;
  long cached_epoch_ = -1;
  std::vector<long> perm_;
};

std::vector<Trajectory> epoch_batch(const std::vector<Trajectory>& dataset, EpochShuffle& shuffle,
                                    long step, long batch_size) {
  std::vector<Trajectory> batch;
  batch.reserve(batch_size);
  const long base = (step - 1) * batch_size;
  for (long i = 0; i < batch_size; ++i) batch.push_back(dataset[shuffle.at(base + i)]);
  return batch;
}

SamplerConfig rollout_sampler(const ExperimentConfig& cfg) {
  SamplerConfig sc;
  sc.mode = DecodeMode::sample;
  sc.temperature = 1.0;
  sc.max_len = static_cast<int>(cfg.max_completion);
  return sc;
}

AdamConfig adam_config(double learning_rate, long warmup_steps) {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.warmup_steps = warmup_steps;
  return a;
}

ModelConfig scalar_head_config(const ExperimentConfig& cfg, long vocab_size) {
  ModelConfig m = cfg.model();
  m.vocab_size = vocab_size;
  m.head_width = 1;
  return m;
}

std::vector<ad::Parameter*> joined_params(PolicyModel& policy, SequenceModel& value_net) {
  std::vector<ad::Parameter*> params = policy.net.parameters();
  for (ad::Parameter* p : value_net.parameters()) params.push_back(p);
  return params;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << content;
    if (!os) throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    parts.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

}  // namespace

RolloutBuffer::RolloutBuffer(long capacity, long staleness)
    : capacity_(capacity), staleness_(staleness) {
  if (capacity < 1) throw std::invalid_argument("RolloutBuffer: capacity must be >= 1");
  if (staleness < 0) throw std::invalid_argument("RolloutBuffer: staleness must be >= 0");
}

void RolloutBuffer::begin_step(long step) {
  if (step < step_) throw std::invalid_argument("RolloutBuffer: clock must not move backwards");
  step_ = step;
  while (!entries_.empty() && entries_.front().step < step_ - staleness_) entries_.pop_front();
}

void RolloutBuffer::push(Trajectory traj) {
  entries_.push_back({std::move(traj), step_});
  if (static_cast<long>(entries_.size()) > capacity_) entries_.pop_front();
}

const Trajectory& RolloutBuffer::sample(Rng& rng) const {
  if (entries_.empty())
    throw std::runtime_error("RolloutBuffer: empty; roll out from the current policy first");
  return entries_[rng.uniform_int(size())].traj;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> assemble_online_batch(
    const std::vector<Trajectory>& dataset, const RolloutBuffer& buffer, double alpha,
    long batch_size, Rng& rng) {
  if (dataset.empty()) throw std::invalid_argument("assemble_online_batch: empty dataset");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("assemble_online_batch: alpha must be in [0,1)");
  if (batch_size < 1)
    throw std::invalid_argument("assemble_online_batch: batch_size must be >= 1");
  if (alpha > 0.0 && buffer.empty())
    throw std::runtime_error(
        "assemble_online_batch: rollout buffer is empty; roll out from the current policy first");
  std::vector<Trajectory> expert;
  std::vector<Trajectory> online;
  for (long i = 0; i < batch_size; ++i) {
    if (alpha > 0.0 && rng.uniform() < alpha)
      online.push_back(buffer.sample(rng));
    else
      expert.push_back(dataset[rng.uniform_int(static_cast<long>(dataset.size()))]);
  }
  return {std::move(expert), std::move(online)};
}

TrainSetup prepare_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  TrainSetup setup;
  setup.task = make_task(task_kind_from_name(cfg.task), static_cast<int>(cfg.prompt_symbols));
  setup.task.max_completion = static_cast<int>(cfg.max_completion);
  if (!cfg.train_data.empty())
    setup.dataset = load_dataset(cfg.train_data, setup.task.vocab);
  else
    setup.dataset = gen_dataset(setup.task, static_cast<int>(cfg.train_examples), cfg.seed);
  if (cfg.subset_percent < 100) {
    const long keep = std::max<long>(
        1, static_cast<long>(setup.dataset.size()) * cfg.subset_percent / 100);
    setup.dataset.resize(keep);
  }
  setup.val_prompts = gen_prompts(setup.task, static_cast<int>(cfg.val_prompts), cfg.seed);
  return setup;
}

const char* TrainHistory::csv_header() {
  return "step,total,mle_term,td_term,entropy_term,pg_term,kl_term,value_term,token_count,"
         "val_accuracy,self_bleu,mean_entropy";
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const EvalRecord& r : records) {
    os << r.step << ',' << fmt(r.loss.total) << ',' << fmt(r.loss.mle_term) << ','
       << fmt(r.loss.td_term) << ',' << fmt(r.loss.entropy_term) << ',' << fmt(r.loss.pg_term)
       << ',' << fmt(r.loss.kl_term) << ',' << fmt(r.loss.value_term) << ',' << r.loss.token_count
       << ',' << fmt(r.val_accuracy) << ',' << fmt(r.self_bleu) << ',' << fmt(r.mean_entropy)
       << '\n';
  }
  return os.str();
}

TrainHistory TrainHistory::from_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("history: cannot open " + path);
  TrainHistory history;
  std::string line;
  if (!std::getline(is, line)) return history;
  if (line != csv_header()) throw std::runtime_error("history: unexpected header in " + path);
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> parts = split_csv_row(line);
    if (parts.size() != 12)
      throw std::runtime_error("history: " + path + ":" + std::to_string(line_no) +
                               ": expected 12 fields");
    EvalRecord r;
    r.step = std::stol(parts[0]);
    r.loss.total = std::stod(parts[1]);
    r.loss.mle_term = std::stod(parts[2]);
    r.loss.td_term = std::stod(parts[3]);
    r.loss.entropy_term = std::stod(parts[4]);
    r.loss.pg_term = std::stod(parts[5]);
    r.loss.kl_term = std::stod(parts[6]);
    r.loss.value_term = std::stod(parts[7]);
    r.loss.token_count = std::stol(parts[8]);
    r.val_accuracy = std::stod(parts[9]);
    r.self_bleu = std::stod(parts[10]);
    r.mean_entropy = std::stod(parts[11]);
    if (!history.records.empty() && r.step <= history.records.back().step)
      throw std::runtime_error("history: " + path + ": steps not strictly increasing");
    history.records.push_back(r);
  }
  return history;
}

GailState::GailState(const ExperimentConfig& cfg, PolicyModel& policy)
    : initial(policy),
      value_net(scalar_head_config(cfg, policy.net.config().vocab_size),
                derive_seed(cfg.seed, "value-net")),
      discriminator(scalar_head_config(cfg, policy.net.config().vocab_size),
                    derive_seed(cfg.seed, "discriminator")),
      policy_opt(adam_config(cfg.learning_rate, cfg.warmup_steps), joined_params(policy, value_net)),
      disc_opt(adam_config(cfg.disc_learning_rate, 0), discriminator.parameters()) {}

LossOutput gail_train_step(const ExperimentConfig& cfg, PolicyModel& policy, GailState& state,
                           const std::vector<Trajectory>& dataset, long step) {
  if (dataset.empty()) throw std::invalid_argument("gail_train_step: empty dataset");
  const long phase_step = step - cfg.warmup_mle_steps;
  if (phase_step < 1)
    throw std::invalid_argument("gail_train_step: step is still inside the warm-up schedule");
  const double kl_weight =
      cfg.kl_weight_final *
      std::min(1.0, static_cast<double>(phase_step) / static_cast<double>(cfg.kl_anneal_steps));

  const SamplerConfig sampler = rollout_sampler(cfg);
  Rng roll_rng(derive_seed(cfg.seed, "rollout", static_cast<uint64_t>(step)));
  std::vector<GailRollout> rollouts;
  rollouts.reserve(cfg.rollouts_per_step);
  for (long i = 0; i < cfg.rollouts_per_step; ++i) {
    const auto& prompt = dataset[roll_rng.uniform_int(static_cast<long>(dataset.size()))].prompt;
    rollouts.push_back(
        make_gail_rollout(state.discriminator, sample(policy, prompt, sampler, roll_rng)));
  }

  Rng batch_rng(derive_seed(cfg.seed, "expert-batch", static_cast<uint64_t>(step)));
  std::vector<Trajectory> expert;
  expert.reserve(cfg.batch_size);
  for (long i = 0; i < cfg.batch_size; ++i)
    expert.push_back(dataset[batch_rng.uniform_int(static_cast<long>(dataset.size()))]);

  LossOutput out;
  {
    ad::Graph g;
    const std::vector<double> advantages = gail_advantages(state.value_net, rollouts, cfg.gamma);
    BuiltLoss built = build_gail_policy_loss(g, policy, state.value_net, state.initial, rollouts,
                                             advantages, expert, kl_weight, cfg.mle_weight,
                                             cfg.gamma);
    check_finite_loss(step, built.out);
    g.backward(built.node);
    state.policy_opt.step(joined_params(policy, state.value_net));
    out = built.out;
  }

  std::vector<Trajectory> generated;
  generated.reserve(rollouts.size());
  for (const GailRollout& r : rollouts) generated.push_back(r.traj);
  {
    ad::Graph g;
    BuiltLoss bce = build_gail_discriminator_loss(g, state.discriminator, expert, generated);
    check_finite_loss(step, bce.out);
    g.backward(bce.node);
    state.disc_opt.step(state.discriminator.parameters());
    ++state.disc_updates;
  }

  const double accuracy = gail_discriminator_accuracy(state.discriminator, expert, generated);
  if (accuracy >= 1.0) {
    ++state.saturated_steps;
    if (state.saturated_steps >= 500 && !state.saturation_warned) {
      std::cerr << "gail: discriminator accuracy pinned at 1.0 for " << state.saturated_steps
                << " consecutive steps; the policy is likely collapsing\n";
      state.saturation_warned = true;
    }
  } else {
    state.saturated_steps = 0;
  }
  return out;
}

namespace {

EvalRecord make_eval_record(const ExperimentConfig& cfg, const TrainSetup& setup,
                            PolicyModel& policy, long step, const LossOutput& loss) {
  const QualityReport q =
      evaluate_quality(policy, setup.val_prompts, setup.task, cfg.eval_sampler(),
                       cfg.eval_samples_per_prompt, derive_seed(cfg.seed, "eval",
                                                                static_cast<uint64_t>(step)));
  EvalRecord rec;
  rec.step = step;
  rec.loss = loss;
  rec.val_accuracy = q.accuracy;
  rec.self_bleu = q.diversity.self_bleu;
  rec.mean_entropy = q.diversity.mean_per_token_entropy;
  return rec;
}

}  // namespace

TrainHistory train(const ExperimentConfig& cfg, const TrainSetup& setup, PolicyModel& policy,
                   const TrainOptions& opts) {
  cfg.validate();
  if (setup.dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (setup.val_prompts.empty()) throw std::invalid_argument("train: no validation prompts");
  if (policy.vocab.size() != setup.task.vocab.size())
    throw std::invalid_argument("train: policy and task vocabularies disagree");
  if (cfg.objective == "iql-online" && cfg.batch_size < 2)
    throw std::invalid_argument(
        "train: iql-online needs batch_size >= 2 so both batch halves can be non-empty");
  if (cfg.objective == "gail" && cfg.warmup_mle_steps < 1)
    throw std::invalid_argument("train: gail requires an mle warm-up (warmup_mle_steps >= 1)");

  std::vector<ad::Parameter*> params = policy.net.parameters();
  Adam opt(adam_config(cfg.learning_rate, cfg.warmup_steps), params);

  const std::string ckpt_path = opts.out_dir.empty() ? "" : opts.out_dir + "/checkpoint.bin";
  const std::string hist_path = opts.out_dir.empty() ? "" : opts.out_dir + "/history.csv";
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  TrainHistory history;
  long start_step = 0;
  if (cfg.resume && !ckpt_path.empty() && std::filesystem::exists(ckpt_path)) {
    if (cfg.objective == "gail")
      throw std::runtime_error(
          "train: adversarial runs cannot resume; discriminator and value state are not "
          "checkpointed");
    const CheckpointMeta meta = load_checkpoint(ckpt_path, policy.net, &opt);
    if (meta.seed != cfg.seed)
      throw std::runtime_error("train: checkpoint seed " + std::to_string(meta.seed) +
                               " does not match config seed " + std::to_string(cfg.seed));
    start_step = static_cast<long>(meta.step);
    if (std::filesystem::exists(hist_path)) {
      history = TrainHistory::from_csv_file(hist_path);
      while (!history.records.empty() && history.records.back().step > start_step)
        history.records.pop_back();
    }
  }

  EpochShuffle shuffle(static_cast<long>(setup.dataset.size()), cfg.seed);
  RolloutBuffer buffer(cfg.buffer_capacity, cfg.buffer_staleness);
  std::optional<GailState> gail;
  const SamplerConfig roll_cfg = rollout_sampler(cfg);

  for (long k = start_step + 1; k <= cfg.total_steps; ++k) {
    const bool warm = k <= cfg.warmup_mle_steps;
    const std::string objective = warm ? std::string("mle") : cfg.objective;
    LossOutput out;
    double kl_weight = 0.0;

    if (objective == "gail") {
      if (!gail) gail.emplace(cfg, policy);
      out = gail_train_step(cfg, policy, *gail, setup.dataset, k);
      kl_weight = cfg.kl_weight_final *
                  std::min(1.0, static_cast<double>(k - cfg.warmup_mle_steps) /
                                    static_cast<double>(cfg.kl_anneal_steps));
    } else {
      ad::Graph g;
      BuiltLoss built;
      if (objective == "iql-online") {
        buffer.begin_step(k);
        Rng roll_rng(derive_seed(cfg.seed, "rollout", static_cast<uint64_t>(k)));
        for (long i = 0; i < cfg.rollouts_per_step; ++i) {
          const auto& prompt =
              setup.dataset[roll_rng.uniform_int(static_cast<long>(setup.dataset.size()))].prompt;
          buffer.push(sample(policy, prompt, roll_cfg, roll_rng));
        }
        Rng mix_rng(derive_seed(cfg.seed, "batch-mix", static_cast<uint64_t>(k)));
        auto [expert, online] =
            assemble_online_batch(setup.dataset, buffer, cfg.alpha, cfg.batch_size, mix_rng);
        // The per-slot Bernoulli split occasionally leaves one side
        // empty; both means in the mixed loss need a sample, so convert
        // one slot. The induced bias is far below the 3-sigma band the
        // mixing contract allows.
        if (online.empty()) {
          expert.pop_back();
          online.push_back(buffer.sample(mix_rng));
        } else if (expert.empty()) {
          online.pop_back();
          expert.push_back(
              setup.dataset[mix_rng.uniform_int(static_cast<long>(setup.dataset.size()))]);
        }
        const StepBatch e = seq_step_batch(g, policy, expert);
        const StepBatch o = seq_step_batch(g, policy, online);
        built = combine_iql_online(g, e, o, cfg.iql());
      } else {
        const std::vector<Trajectory> batch =
            epoch_batch(setup.dataset, shuffle, k, cfg.batch_size);
        if (objective == "mle") {
          built = combine_mle(g, seq_step_batch(g, policy, batch));
        } else if (objective == "mle-ent") {
          built = combine_entropy_mle(g, seq_step_batch(g, policy, batch, true), cfg.lambda);
        } else {
          built = combine_iql_offline(g, seq_step_batch(g, policy, batch), cfg.iql());
        }
      }
      check_finite_loss(k, built.out);
      g.backward(built.node);
      try {
        opt.step(params);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: step " + std::to_string(k) + ": " + e.what());
      }
      out = built.out;
    }

    if (opts.observer) {
      StepInfo info;
      info.step = k;
      info.objective = objective;
      info.loss = out;
      info.kl_weight = kl_weight;
      info.disc_updates = gail ? gail->disc_updates : 0;
      opts.observer(info);
    }

    if (k % cfg.eval_every == 0 || k == cfg.total_steps) {
      history.records.push_back(make_eval_record(cfg, setup, policy, k, out));
      if (!opts.out_dir.empty()) {
        write_text_atomic(hist_path, history.to_csv());
        // The adversarial phase spans three networks whose optimizer
        // state is not serialized; those checkpoints carry parameters
        // only.
        save_checkpoint(ckpt_path, policy.net,
                        {static_cast<uint64_t>(k), cfg.seed},
                        objective == "gail" ? nullptr : &opt);
      }
    }
  }
  return history;
}

}  // namespace seqil
