#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqil/rng.hpp"
#include "seqil/sequence_mdp.hpp"
#include "seqil/vocab.hpp"

namespace seqil {

enum class TaskKind { copy, reverse, modular_sum, multi_reference };

std::string task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

// Procedurally generated sequence-to-sequence tasks.
//   copy            repeat the prompt symbols
//   reverse         emit the prompt symbols reversed
//   modular_sum     prompt "a + b", answer (a+b) mod 10 as one digit
//   multi_reference several completions are correct per prompt
//                   (identity, reverse, rotate-left, rotate-right)
struct SyntheticTask {
  TaskKind kind = TaskKind::copy;
  Vocabulary vocab;
  int prompt_symbols = 4;   // payload symbols per prompt
  int max_completion = 64;  // generation cap used by samplers

  // All correct completions for a prompt, each ending in eos.
  // Duplicates are removed; order is deterministic.
  std::vector<std::vector<int>> references(const std::vector<int>& prompt) const;

  // Exact match against any reference. The trajectory must have
  // terminated for it to count.
  bool check(const Trajectory& traj) const;

  // Freshly sampled prompt (bos followed by payload symbols).
  std::vector<int> sample_prompt(Rng& rng) const;

  // One example with a uniformly chosen reference completion.
  Trajectory make_example(Rng& rng) const;
};

SyntheticTask make_task(TaskKind kind, int prompt_symbols = 4);

// Deterministic dataset of n examples. For the multi-reference task the
// examples come in same-prompt pairs with two distinct completions, so
// every prompt in the dataset demonstrates at least two answers.
std::vector<Trajectory> gen_dataset(const SyntheticTask& task, int n, uint64_t seed);

// Distinct evaluation prompts (resampled on collision).
std::vector<std::vector<int>> gen_prompts(const SyntheticTask& task, int n, uint64_t seed);

}  // namespace seqil
