#pragma once

#include "cpsr/linalg.hpp"
#include "cpsr/rng.hpp"

namespace cpsr {

struct StepResult {
  int observation = 0;
  double reward = 0.0;
  bool done = false;   // hard episode end
  bool reset = false;  // environment teleported to its start configuration
};

// Discrete partially observable environment. All stochasticity is drawn from
// the stream passed in, so episodes are a pure function of their seed.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual int num_actions() const = 0;
  virtual int num_observations() const = 0;

  virtual void reset(rng::Stream& gen) = 0;
  virtual StepResult step(int action, rng::Stream& gen) = 0;

  // Feature encoding of one observation symbol for reactive (memoryless)
  // controllers: a one-hot or bit-vector expansion, constant dimension.
  virtual int observation_feature_dim() const = 0;
  virtual Vec observation_features(int observation) const = 0;
};

}  // namespace cpsr
