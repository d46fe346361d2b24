#pragma once

#include "ralab/core.hpp"

namespace ralab {

struct RmsPropConfig {
  double lr = 1e-4;
  double decay = 0.9;
  double eps = 1e-8;
};

// Running mean of squared gradients, one block per parameter.
struct RmsPropState {
  ParamSet mean_square;
};

// state <- decay * state + (1 - decay) * g^2;  p <- p - lr * g / sqrt(state + eps).
// An empty state is initialised to zeros of matching shape.
void rmsprop_step(ParamSet& params, const ParamSet& grads, RmsPropState& state, const RmsPropConfig& config);

}  // namespace ralab
