#include "seqil/toy_mdp.hpp"

#include <stdexcept>
#include <string>

namespace seqil {

void ToyMdp::validate() const {
  if (chain_length < 1) throw std::invalid_argument("ToyMdp: chain_length must be >= 1");
  if (noise < 0.0 || noise > 1.0) throw std::invalid_argument("ToyMdp: noise must be in [0,1]");
  if (horizon < 1) throw std::invalid_argument("ToyMdp: horizon must be >= 1");
}

ToyMdp::Outcome ToyMdp::apply(int state, int action) const {
  if (action != kAdvance && action != kDeviate)
    throw std::invalid_argument("ToyMdp::apply: invalid action " + std::to_string(action));
  if (is_goal(state)) throw std::invalid_argument("ToyMdp::apply: goal state is terminal");
  if (state < 0 || state >= n_states())
    throw std::invalid_argument("ToyMdp::apply: state " + std::to_string(state) + " out of range");

  Outcome o;
  if (is_bottom(state)) {
    if (action == kAdvance) {
      if (state + 1 == chain_length) {
        o.next_state = goal_state();
        o.reward = goal_reward;
        o.terminal = true;
      } else {
        o.next_state = state + 1;
      }
    } else {
      o.next_state = top_of(state);
    }
    return o;
  }

  // Top state: action 0 returns to the bottom chain when the variant
  // allows it, everything else stays put.
  if (recoverable && action == kAdvance)
    o.next_state = bottom_of(state);
  else
    o.next_state = state;
  return o;
}

ToyMdp::Outcome ToyMdp::step(int state, int action, Rng& rng) const {
  if (action != kAdvance && action != kDeviate)
    throw std::invalid_argument("ToyMdp::step: invalid action " + std::to_string(action));
  const bool flip = rng.uniform() < noise;
  const int executed = flip ? 1 - action : action;
  return apply(state, executed);
}

std::vector<ToyEpisode> toy_demonstrations(const ToyMdp& mdp, int count) {
  mdp.validate();
  if (count < 0) throw std::invalid_argument("toy_demonstrations: count must be >= 0");
  std::vector<ToyEpisode> out;
  out.reserve(static_cast<size_t>(count));
  for (int e = 0; e < count; ++e) {
    ToyEpisode ep;
    int s = 0;
    while (!mdp.is_goal(s)) {
      ToyMdp::Outcome o = mdp.apply(s, ToyMdp::kAdvance);
      ep.steps.push_back({s, ToyMdp::kAdvance, o.next_state, o.terminal});
      ep.total_reward += o.reward;
      s = o.next_state;
    }
    ep.reached_goal = true;
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace seqil
