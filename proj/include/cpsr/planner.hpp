#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cpsr/extra_trees.hpp"
#include "cpsr/learner.hpp"
#include "cpsr/sampling.hpp"
#include "cpsr/simulator.hpp"

namespace cpsr {

// One environment step seen as a regression sample for value iteration. For
// predictive-state planning the state vectors are filtered model states; the
// memoryless baseline stores observation feature vectors in the same slots.
struct TransitionTuple {
  Vec state;
  int action = 0;
  double reward = 0.0;
  Vec next_state;
  // Terminal steps bootstrap nothing: their regression target is the bare
  // reward. A step is terminal when the environment ended the episode there
  // or teleported back to its start configuration (bootstrapping across such
  // a teleport would blend values of unrelated situations).
  bool terminal = false;
};

struct PlannerConfig {
  double gamma = 0.99;         // discount in [0, 1); 0 makes targets purely myopic
  int fitted_q_iterations = 100;
  int trees_per_action = 25;
  int model_episodes = 10000;  // episodes sampled per round for model learning
  int planning_episodes = 1000;  // leading subset of those converted to tuples
  int sampling_iterations = 1;   // rounds of the sample/learn/plan loop
  int max_episode_len = 100;     // step cap for sampled episodes
  // When true, rounds after the first sample with an epsilon-greedy version
  // of the latest policy instead of uniform actions. Off by default: greedy
  // sampling tends to starve the model of exploratory data.
  bool greedy_sampling = false;
  double epsilon = 0.1;  // exploration rate for greedy sampling
  int min_node_size = 5;    // tree leaf threshold, as in ExtraTreesParams
  int num_candidates = 0;   // tree split candidates per node; 0 = all features
  void validate() const;
};

// Greedy policy backed by one regression ensemble per action. Actions whose
// ensemble is empty (no training data) score a constant 0.
struct Policy {
  std::vector<Ensemble> q;  // indexed by action id
  std::vector<int> actions_without_data;

  int num_actions() const { return static_cast<int>(q.size()); }
  double value(const Vec& state, int action) const;
  // Highest-value action; exact ties go to the lowest action id.
  int greedy_action(const Vec& state) const;
};

struct TupleBuild {
  std::vector<TransitionTuple> tuples;
  // Steps dropped because state filtering broke down mid-episode (the model
  // assigned the observed symbol no probability); every remaining step of
  // that episode is counted here.
  std::size_t skipped_steps = 0;
};

// Filters each trajectory through the model from the start state and emits
// one tuple per step: (state before, action, reward, state after). Only the
// first `limit` trajectories are used (limit <= 0 means all). Once a step
// yields an invalid state the rest of that episode is skipped and counted.
// Trajectories must carry rewards.
TupleBuild build_tuples(const CpsrModel& model, const TrajectorySet& trajs, int limit);

// Same tuple layout with observation feature vectors as states: the state
// before the first action of an episode is the zero vector, afterwards the
// features of the latest observation. No filtering, so nothing is skipped.
TupleBuild build_memoryless_tuples(const Simulator& domain, const TrajectorySet& trajs,
                                   int limit);

// Approximate value iteration on a fixed tuple set. Starting from Q = 0,
// each of cfg.fitted_q_iterations rounds refits one ensemble per action on
// that action's tuples with targets
//   reward + gamma * max_a' Q_previous(next_state, a')
// (bare reward for terminal tuples). Round k fits action a's ensemble with
// seed mix(mix(seed, k), a), k counted from 1, so results are reproducible
// and a single round with gamma = 0 equals plain immediate-reward
// regression. Actions with no tuples keep the constant-0 ensemble and are
// listed in actions_without_data. Throws UsageError on empty input,
// inconsistent dimensions, out-of-range actions, or non-finite values.
Policy fitted_q(const std::vector<TransitionTuple>& tuples, const PlannerConfig& cfg,
                int num_actions, std::uint64_t seed);

// Plays the greedy policy on filtered model states. If filtering breaks down
// (the model gives the observed symbol no probability), the next action is
// uniform random and the state restarts from the model's start state.
class ModelPolicyAgent : public Agent {
 public:
  ModelPolicyAgent(const CpsrModel& model, const Policy& policy);
  void begin_episode() override;
  int act(rng::Stream& gen) override;
  void observe(int action, int observation) override;

 private:
  const CpsrModel& model_;
  const Policy& policy_;
  PredictiveState state_;
};

// Plays the greedy policy on the latest observation's feature vector; before
// the first observation of an episode the input is the zero vector.
class MemorylessAgent : public Agent {
 public:
  MemorylessAgent(const Policy& policy, const Simulator& domain);
  void begin_episode() override;
  int act(rng::Stream& gen) override;
  void observe(int action, int observation) override;

 private:
  const Policy& policy_;
  const Simulator& domain_;
  Vec features_;
};

struct EvalMetrics {
  double mean_return = 0.0;             // undiscounted per-episode reward sum
  double mean_discounted_return = 0.0;  // sum of gamma^t * reward per episode
  double ci_return = 0.0;               // 95% normal half-width of the mean
  double ci_discounted = 0.0;
  int episodes = 0;
};

// Rolls `episodes` independent episodes of at most max_len steps and averages
// the returns. Episode e draws all randomness from a stream seeded with
// mix(seed, e), matching the corpus sampler, so results are reproducible.
// gamma must lie in (0, 1]; 1 makes the discounted mean equal the plain mean.
EvalMetrics eval_policy(Simulator& domain, Agent& agent, int episodes, int max_len,
                        double gamma, std::uint64_t seed);

struct CombinedMetrics {
  struct Round {
    int episodes_sampled = 0;
    std::size_t new_tuples = 0;
    std::size_t cumulative_tuples = 0;
    std::size_t skipped_steps = 0;
    int model_rank = 0;
  };
  std::vector<Round> rounds;
};

struct CombinedResult {
  CpsrModel model;
  Policy policy;
  CombinedMetrics metrics;
};

// The full sample/learn/plan loop. Each round samples cfg.model_episodes
// episodes (round r with stream seed mix(mix(seed, 1), r)), folds them into
// the model (built fresh on round 0, incrementally updated afterwards),
// converts the first cfg.planning_episodes of them into tuples with the
// current model, appends those to the cumulative tuple set, and refits the
// policy on everything collected so far (fitted_q seed mix(mix(seed, 2), r)).
// Sampling uses uniform actions, or the epsilon-greedy current policy when
// cfg.greedy_sampling is set and a policy exists. With one round this is the
// plain batch pipeline: sample, learn the model, plan once.
CombinedResult run_combined(Simulator& domain, const LearnerConfig& learner_cfg,
                            const PlannerConfig& planner_cfg, std::uint64_t seed);

// Fits the observation-feature baseline on the given corpus: memoryless
// tuples from every trajectory, then fitted_q with the same configuration.
Policy memoryless_baseline(const Simulator& domain, const TrajectorySet& trajs,
                           const PlannerConfig& cfg, std::uint64_t seed);

}  // namespace cpsr
