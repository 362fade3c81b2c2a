#pragma once

#include <cstdint>

#include "cpsr/rng.hpp"
#include "cpsr/simulator.hpp"
#include "cpsr/trajectory.hpp"

namespace cpsr {

// Action-selection policy driven by the episode's RNG stream. Agents see each
// (action, observation) pair after the environment step, so stateful policies
// can track context; there is no observation before the first action.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode() {}
  virtual int act(rng::Stream& gen) = 0;
  virtual void observe(int action, int observation) { (void)action, (void)observation; }
};

class UniformAgent : public Agent {
 public:
  explicit UniformAgent(int num_actions);
  int act(rng::Stream& gen) override { return gen.next_int(num_actions_); }

 private:
  int num_actions_;
};

// Follows a base agent but explores uniformly with probability epsilon.
class EpsilonGreedyAgent : public Agent {
 public:
  EpsilonGreedyAgent(Agent& base, double epsilon, int num_actions);
  void begin_episode() override { base_.begin_episode(); }
  int act(rng::Stream& gen) override;
  void observe(int action, int observation) override { base_.observe(action, observation); }

 private:
  Agent& base_;
  double epsilon_;
  int num_actions_;
};

// Runs num_episodes independent episodes of at most max_len steps each.
// Episode e draws all randomness (environment and agent) from a stream seeded
// with mix(seed, e), so a corpus is a pure function of its seed. Episodes end
// early when the simulator reports done; that is recorded as terminated.
TrajectorySet sample_trajectories(Simulator& sim, Agent& agent, int num_episodes, int max_len,
                                  std::uint64_t seed, bool with_rewards = true);

}  // namespace cpsr
