#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqil/tape.hpp"

namespace seqil {

struct ModelConfig {
  long vocab_size = 0;
  long head_width = 0;  // output columns: vocab_size for policies, 1 for scalar heads
  long max_context = 96;
  long embed_dim = 32;
  long hidden_dim = 64;
  long layers = 2;
  double init_std = 0.08;

  void validate() const;
};

// Causal self-attention network over token prefixes. Single head,
// learned positional embeddings, residual attention and relu MLP
// blocks, linear output head. The head starts at zero so a fresh model
// emits all-zero outputs regardless of the prefix.
class SequenceModel {
 public:
  SequenceModel(ModelConfig cfg, uint64_t seed);

  // Appends the forward computation for one prefix to the graph and
  // returns the [len, head_width] output (row i conditions on tokens
  // 0..i).
  ad::Ref forward(ad::Graph& g, const std::vector<int>& tokens);

  // Output values without keeping a graph.
  Tensor forward_values(const std::vector<int>& tokens);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  ad::Parameter& param(const std::string& name);

  const ModelConfig& config() const { return cfg_; }
  uint64_t init_seed() const { return seed_; }

 private:
  ModelConfig cfg_;
  uint64_t seed_ = 0;
  std::vector<ad::Parameter> params_;

  void check_tokens(const std::vector<int>& tokens) const;
};

}  // namespace seqil
