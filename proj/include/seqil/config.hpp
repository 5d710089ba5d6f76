#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seqil/model.hpp"
#include "seqil/objectives.hpp"
#include "seqil/policy.hpp"

namespace seqil {

// Everything a training run needs, serializable as flat `key = value`
// text. Unknown keys are a hard error so typos never fall back to
// defaults silently.
struct ExperimentConfig {
  std::string objective = "mle";  // mle | mle-ent | iql-offline | iql-online | gail
  std::string task = "copy";      // copy | reverse | modular-sum | multi-reference
  long prompt_symbols = 4;
  uint64_t seed = 1;

  long train_examples = 256;
  long subset_percent = 100;  // keep only the first N% of the dataset
  std::string train_data;     // optional dataset file; empty generates one
  long val_prompts = 64;

  long total_steps = 1000;
  long warmup_mle_steps = 0;
  long batch_size = 32;
  double learning_rate = 1e-4;
  long warmup_steps = 2000;  // optimizer learning-rate warmup

  double lambda = 0.1;
  double gamma = 1.0;
  double alpha = 0.1;
  long buffer_capacity = 64;
  long buffer_staleness = 0;  // 0 keeps only the current step's rollouts
  long rollouts_per_step = 4;

  double kl_weight_final = 1e-3;
  long kl_anneal_steps = 10000;
  double mle_weight = 0.0;
  double disc_learning_rate = 1e-4;

  long embed_dim = 32;
  long hidden_dim = 64;
  long layers = 2;
  long max_context = 96;
  double init_std = 0.08;
  long max_completion = 64;

  long eval_every = 100;
  std::string eval_mode = "sample";  // sample | greedy | beam
  double eval_temperature = 1.0;
  long eval_samples_per_prompt = 1;  // >= 2 enables Self-BLEU in the history
  long beam_size = 4;
  double length_penalty = 0.6;

  bool resume = false;

  void validate() const;

  IqlConfig iql() const { return {lambda, gamma, alpha}; }
  ModelConfig model() const;
  SamplerConfig eval_sampler() const;

  // Flat serialization; parse(serialize(c)) == c.
  std::map<std::string, std::string> to_map() const;
  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
  std::string serialize() const;

  // Applies one key=value assignment; unknown key throws and the
  // message lists every valid key.
  void set(const std::string& key, const std::string& value);

  // Order-independent content hash of the resolved config.
  uint64_t content_hash() const;

  static ExperimentConfig from_file(const std::string& path);
  static std::vector<std::string> valid_keys();
};

// Splits "key=value" (or "key = value") into its parts.
std::pair<std::string, std::string> split_assignment(const std::string& text);

}  // namespace seqil
