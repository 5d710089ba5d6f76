#pragma once

#include <string>
#include <vector>

#include "seqil/vocab.hpp"

namespace seqil {

// One demonstrated or generated sequence. The prompt starts with bos;
// the completion holds the generated tokens (including eos when the
// model stopped on its own). terminated is true when the completion
// ended with eos or hit the length cap, false when decoding was cut off
// some other way (e.g. beam search returned an unfinished hypothesis).
struct Trajectory {
  std::vector<int> prompt;
  std::vector<int> completion;
  bool terminated = false;

  std::vector<int> full() const {
    std::vector<int> t = prompt;
    t.insert(t.end(), completion.begin(), completion.end());
    return t;
  }
};

// One step of the token-level MDP: the state is the token prefix, the
// action appends one token.
struct Transition {
  std::vector<int> state;
  int action = 0;
  std::vector<int> next_state;
  bool terminal = false;
};

// Token-level view of autoregressive generation: deterministic append
// dynamics, terminal on eos or when the prefix reaches max_len tokens.
struct SeqMdp {
  Vocabulary vocab;
  long max_len = 0;

  Transition step(const std::vector<int>& state, int action) const;
};

// Expands a trajectory into its per-token transitions. The state of
// transition t is prompt + completion[0..t); the final transition is
// terminal iff the trajectory is.
std::vector<Transition> trajectory_to_transitions(const Trajectory& traj);

// Plain-text dataset: one line per trajectory,
//   prompt-ids TAB completion-ids TAB terminated(0|1)
// with ids space-separated.
void save_dataset(const std::string& path, const std::vector<Trajectory>& data);
std::vector<Trajectory> load_dataset(const std::string& path, const Vocabulary& vocab);

}  // namespace seqil
