#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "seqil/tape.hpp"

namespace seqil {

struct AdamConfig {
  double learning_rate = 1e-4;
  long warmup_steps = 0;  // linear warmup; 0 disables it
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction and linear learning-rate warmup. A step
// consumes the gradients accumulated in the parameters and clears them.
class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<ad::Parameter*>& params);

  // Applies one update. Throws if any gradient is non-finite or if a
  // parameter shape changed since construction; parameters are left
  // untouched in that case.
  void step(const std::vector<ad::Parameter*>& params);

  long step_count() const { return step_count_; }

  // Effective rate that step number k (1-based) uses.
  double effective_rate(long k) const;

  void save(std::ostream& os) const;
  // Restores moment buffers and the step counter. Throws on shape or
  // count mismatch with the construction-time parameters.
  void load(std::istream& is, const std::vector<ad::Parameter*>& params);

 private:
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

void zero_grads(const std::vector<ad::Parameter*>& params);

}  // namespace seqil
