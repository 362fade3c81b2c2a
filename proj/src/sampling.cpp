#include "cpsr/sampling.hpp"

#include "cpsr/errors.hpp"

namespace cpsr {

UniformAgent::UniformAgent(int num_actions) : num_actions_(num_actions) {
  if (num_actions < 1) throw UsageError("need at least one action");
}

EpsilonGreedyAgent::EpsilonGreedyAgent(Agent& base, double epsilon, int num_actions)
    : base_(base), epsilon_(epsilon), num_actions_(num_actions) {
  if (epsilon < 0.0 || epsilon > 1.0) throw UsageError("epsilon must be in [0,1]");
  if (num_actions < 1) throw UsageError("need at least one action");
}

int EpsilonGreedyAgent::act(rng::Stream& gen) {
  // The coin is drawn before the base decision so the stream stays aligned
  // whether or not the base agent consumes randomness.
  const bool explore = gen.next_double() < epsilon_;
  const int greedy = base_.act(gen);
  return explore ? gen.next_int(num_actions_) : greedy;
}

TrajectorySet sample_trajectories(Simulator& sim, Agent& agent, int num_episodes, int max_len,
                                  std::uint64_t seed, bool with_rewards) {
  if (num_episodes < 1) throw UsageError("need at least one episode");
  if (max_len < 0) throw UsageError("max_len must be nonnegative");
  TrajectorySet out;
  out.reserve(static_cast<std::size_t>(num_episodes));
  for (int e = 0; e < num_episodes; ++e) {
    rng::Stream gen(rng::mix(seed, static_cast<std::uint64_t>(e)));
    sim.reset(gen);
    agent.begin_episode();
    Trajectory z;
    for (int t = 0; t < max_len; ++t) {
      const int action = agent.act(gen);
      const StepResult res = sim.step(action, gen);
      z.actions.push_back(action);
      z.observations.push_back(res.observation);
      if (with_rewards) z.rewards.push_back(res.reward);
      z.resets.push_back(res.reset ? 1 : 0);
      agent.observe(action, res.observation);
      if (res.done) {
        z.terminated = true;
        break;
      }
    }
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace cpsr
