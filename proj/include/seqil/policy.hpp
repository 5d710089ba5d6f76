#pragma once

#include <string>
#include <vector>

#include "seqil/model.hpp"
#include "seqil/rng.hpp"
#include "seqil/sequence_mdp.hpp"
#include "seqil/vocab.hpp"

namespace seqil {

// Autoregressive policy whose logits double as shaped action values:
// the state value is logsumexp(logits) and log-probabilities are
// logits minus the state value.
struct PolicyModel {
  Vocabulary vocab;
  SequenceModel net;

  PolicyModel(Vocabulary v, ModelConfig cfg, uint64_t seed);

  // Logits of the next token after the given prefix.
  std::vector<double> logits(const std::vector<int>& state);
  // logsumexp of the logits.
  double state_value(const std::vector<int>& state);
  // logits[action] - state_value; exact softmax log-probability.
  double log_prob(const std::vector<int>& state, int action);
  // Entropy of the next-token distribution, in nats.
  double per_token_entropy(const std::vector<int>& state);

  // Full [len, vocab] logit matrix for a prefix, without a graph.
  Tensor logits_matrix(const std::vector<int>& tokens) { return net.forward_values(tokens); }
};

enum class DecodeMode { sample, greedy, beam };

DecodeMode decode_mode_from_name(const std::string& name);
std::string decode_mode_name(DecodeMode m);

struct SamplerConfig {
  DecodeMode mode = DecodeMode::sample;
  double temperature = 1.0;
  int max_len = 64;       // completion token cap (including eos)
  int beam_size = 4;
  double length_penalty = 0.6;

  void validate() const;
};

// Draws one completion token by token at the configured temperature.
Trajectory sample(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg,
                  Rng& rng);

// Deterministic argmax decoding (ties go to the lowest token id).
Trajectory greedy(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg);

// Length-normalized beam search. Hypotheses are scored by
// sum(log p) / len^length_penalty; finished hypotheses keep competing
// for beam slots. With beam_size 1 this reduces to greedy decoding.
Trajectory beam_search(PolicyModel& policy, const std::vector<int>& prompt,
                       const SamplerConfig& cfg);

// Dispatches on cfg.mode. rng may be null for greedy and beam.
Trajectory decode(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg,
                  Rng* rng);

// Entropy of each next-token distribution along a trajectory's
// completion, averaged.
double mean_completion_entropy(PolicyModel& policy, const Trajectory& traj);

}  // namespace seqil
