#pragma once

#include <vector>

#include "seqil/rng.hpp"

namespace seqil {

struct ToyTransition {
  int state = 0;
  int action = 0;
  int next_state = 0;
  bool terminal = false;
};

struct ToyEpisode {
  std::vector<ToyTransition> steps;
  double total_reward = 0.0;
  bool reached_goal = false;
};

// Small chain MDP with distractor states. Bottom states b_0..b_{L-1}
// form a chain to a rewarded goal; each b_i has one top state t_i
// hanging off it. Action 0 advances along the chain (or, from a top
// state, returns to the bottom when the variant allows it); action 1
// deviates to the top state (or stays there). Each step the executed
// action is flipped to the other one with probability `noise`.
//
// In the recoverable variant, action 0 from t_i leads back to b_i. In
// the non-recoverable variant every action from a top state stays in
// that top state.
struct ToyMdp {
  int chain_length = 5;
  double noise = 0.1;
  bool recoverable = true;
  double goal_reward = 1.0;
  int horizon = 20;

  static constexpr int kAdvance = 0;
  static constexpr int kDeviate = 1;

  int n_states() const { return 2 * chain_length + 1; }
  int n_actions() const { return 2; }
  int goal_state() const { return 2 * chain_length; }
  bool is_bottom(int s) const { return s >= 0 && s < chain_length; }
  bool is_top(int s) const { return s >= chain_length && s < 2 * chain_length; }
  bool is_goal(int s) const { return s == goal_state(); }
  int top_of(int bottom) const { return chain_length + bottom; }
  int bottom_of(int top) const { return top - chain_length; }

  struct Outcome {
    int next_state = 0;
    double reward = 0.0;
    bool terminal = false;
  };

  void validate() const;

  // Deterministic effect of executing an action (no noise applied).
  Outcome apply(int state, int action) const;

  // Noisy step: with probability `noise` the other action is executed.
  Outcome step(int state, int action, Rng& rng) const;
};

// Noise-free expert demonstrations: always advance along the bottom
// chain until the goal. Top states never appear.
std::vector<ToyEpisode> toy_demonstrations(const ToyMdp& mdp, int count);

}  // namespace seqil
