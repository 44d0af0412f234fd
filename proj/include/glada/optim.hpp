#pragma once

#include <cstdint>
#include <vector>

#include "glada/nets.hpp"

namespace glada::nets {

struct AdamSettings {
  Real learning_rate = 1e-3;
  Real beta1 = 0.5;
  Real beta2 = 0.9;
  Real epsilon = 1e-8;
};

// Moment accumulators for one parameter bank. Non-trainable arrays keep
// empty moments and are never touched by the update.
struct OptimState {
  AdamSettings settings;
  std::uint64_t step = 0;
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;

  OptimState() = default;
  OptimState(const NetParams& params, AdamSettings s);
};

// One bias-corrected Adam update. Throws ShapeError on layout mismatch and
// NumericError on a non-finite gradient; neither params nor state change then.
void adam_step(NetParams& params, const NetParams& grads, OptimState& state);

}  // namespace glada::nets
