#include "cpsr/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cpsr/errors.hpp"

namespace cpsr {

namespace {

constexpr double kNormal95 = 1.959963984540054;

// Mean and 95% normal-approximation half-width of the mean.
std::pair<double, double> mean_with_ci(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, kNormal95 * sd / std::sqrt(n)};
}

std::size_t trajectory_limit(const TrajectorySet& trajs, int limit) {
  if (limit <= 0) return trajs.size();
  return std::min(trajs.size(), static_cast<std::size_t>(limit));
}

}  // namespace

void PlannerConfig::validate() const {
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw UsageError("discount must lie in [0, 1)");
  }
  if (fitted_q_iterations < 1) throw UsageError("fitted-Q needs at least one round");
  if (trees_per_action < 1) throw UsageError("each action needs at least one tree");
  if (planning_episodes < 1) throw UsageError("planning needs at least one episode");
  if (model_episodes < planning_episodes) {
    throw UsageError("model episodes must be at least planning episodes");
  }
  if (sampling_iterations < 1) throw UsageError("need at least one sampling round");
  if (max_episode_len < 1) throw UsageError("episode cap must be positive");
  if (!(epsilon >= 0.0) || epsilon > 1.0) throw UsageError("epsilon must lie in [0, 1]");
  if (min_node_size < 1) throw UsageError("min node size must be positive");
  if (num_candidates < 0) throw UsageError("candidate count must be non-negative");
}

double Policy::value(const Vec& state, int action) const {
  if (action < 0 || action >= num_actions()) throw UsageError("action id out of range");
  const Ensemble& ensemble = q[static_cast<std::size_t>(action)];
  return ensemble.trees.empty() ? 0.0 : ensemble.predict(state);
}

int Policy::greedy_action(const Vec& state) const {
  if (q.empty()) throw UsageError("policy has no actions");
  int best = 0;
  double best_value = value(state, 0);
  for (int a = 1; a < num_actions(); ++a) {
    const double v = value(state, a);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

TupleBuild build_tuples(const CpsrModel& model, const TrajectorySet& trajs, int limit) {
  TupleBuild out;
  const std::size_t count = trajectory_limit(trajs, limit);
  for (std::size_t i = 0; i < count; ++i) {
    const Trajectory& traj = trajs[i];
    traj.validate();
    if (traj.size() == 0) continue;
    if (!traj.has_rewards()) throw UsageError("tuple construction needs rewards");
    PredictiveState state = start_state(model);
    for (std::size_t t = 0; t < traj.size(); ++t) {
      PredictiveState next = update_state(model, state, traj.actions[t], traj.observations[t]);
      if (!next.valid) {
        out.skipped_steps += traj.size() - t;
        break;
      }
      TransitionTuple tuple;
      tuple.state = state.v;
      tuple.action = traj.actions[t];
      tuple.reward = traj.rewards[t];
      tuple.next_state = next.v;
      tuple.terminal = traj.reset_at(t) || (t + 1 == traj.size() && traj.terminated);
      out.tuples.push_back(std::move(tuple));
      state = std::move(next);
    }
  }
  return out;
}

TupleBuild build_memoryless_tuples(const Simulator& domain, const TrajectorySet& trajs,
                                   int limit) {
  TupleBuild out;
  const std::size_t count = trajectory_limit(trajs, limit);
  const int dim = domain.observation_feature_dim();
  for (std::size_t i = 0; i < count; ++i) {
    const Trajectory& traj = trajs[i];
    traj.validate();
    if (traj.size() == 0) continue;
    if (!traj.has_rewards()) throw UsageError("tuple construction needs rewards");
    Vec features = Vec::Zero(dim);
    for (std::size_t t = 0; t < traj.size(); ++t) {
      Vec next = domain.observation_features(traj.observations[t]);
      TransitionTuple tuple;
      tuple.state = features;
      tuple.action = traj.actions[t];
      tuple.reward = traj.rewards[t];
      tuple.next_state = next;
      tuple.terminal = traj.reset_at(t) || (t + 1 == traj.size() && traj.terminated);
      out.tuples.push_back(std::move(tuple));
      features = std::move(next);
    }
  }
  return out;
}

Policy fitted_q(const std::vector<TransitionTuple>& tuples, const PlannerConfig& cfg,
                int num_actions, std::uint64_t seed) {
  cfg.validate();
  if (num_actions <= 0) throw UsageError("fitted-Q needs a positive action count");
  if (tuples.empty()) throw UsageError("fitted-Q needs at least one tuple");
  const auto dim = tuples.front().state.size();
  if (dim <= 0) throw UsageError("fitted-Q needs non-empty state vectors");
  for (const TransitionTuple& tuple : tuples) {
    if (tuple.action < 0 || tuple.action >= num_actions) {
      throw UsageError("tuple action out of range");
    }
    if (tuple.state.size() != dim || tuple.next_state.size() != dim) {
      throw UsageError("tuple state dimensions are inconsistent");
    }
    if (!tuple.state.allFinite() || !tuple.next_state.allFinite() ||
        !std::isfinite(tuple.reward)) {
      throw UsageError("tuple contains non-finite values");
    }
  }

  // The per-action design matrices never change across rounds; only the
  // regression targets do.
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(num_actions));
  for (std::size_t l = 0; l < tuples.size(); ++l) {
    rows[static_cast<std::size_t>(tuples[l].action)].push_back(l);
  }
  std::vector<Mat> inputs(static_cast<std::size_t>(num_actions));
  for (int a = 0; a < num_actions; ++a) {
    const auto& list = rows[static_cast<std::size_t>(a)];
    Mat& x = inputs[static_cast<std::size_t>(a)];
    x.resize(static_cast<Eigen::Index>(list.size()), dim);
    for (std::size_t r = 0; r < list.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = tuples[list[r]].state.transpose();
    }
  }

  ExtraTreesParams params;
  params.num_trees = cfg.trees_per_action;
  params.num_candidates = cfg.num_candidates;
  params.min_node_size = cfg.min_node_size;

  Policy policy;
  policy.q.resize(static_cast<std::size_t>(num_actions));
  for (int a = 0; a < num_actions; ++a) {
    if (rows[static_cast<std::size_t>(a)].empty()) policy.actions_without_data.push_back(a);
  }

  for (int k = 1; k <= cfg.fitted_q_iterations; ++k) {
    // Value of every successor state under the previous round's ensembles.
    std::vector<double> next_value(tuples.size(), 0.0);
    if (cfg.gamma > 0.0) {
      for (std::size_t l = 0; l < tuples.size(); ++l) {
        if (tuples[l].terminal) continue;
        double best = policy.value(tuples[l].next_state, 0);
        for (int a = 1; a < num_actions; ++a) {
          best = std::max(best, policy.value(tuples[l].next_state, a));
        }
        next_value[l] = best;
      }
    }
    for (int a = 0; a < num_actions; ++a) {
      const auto& list = rows[static_cast<std::size_t>(a)];
      if (list.empty()) continue;
      Vec y(static_cast<Eigen::Index>(list.size()));
      for (std::size_t r = 0; r < list.size(); ++r) {
        const TransitionTuple& tuple = tuples[list[r]];
        double target = tuple.reward;
        if (!tuple.terminal) target += cfg.gamma * next_value[list[r]];
        y(static_cast<Eigen::Index>(r)) = target;
      }
      policy.q[static_cast<std::size_t>(a)] =
          fit_extra_trees(inputs[static_cast<std::size_t>(a)], y, params,
                          rng::mix(rng::mix(seed, static_cast<std::uint64_t>(k)),
                                   static_cast<std::uint64_t>(a)));
    }
  }
  return policy;
}

ModelPolicyAgent::ModelPolicyAgent(const CpsrModel& model, const Policy& policy)
    : model_(model), policy_(policy), state_(start_state(model)) {
  if (policy.num_actions() == 0) throw UsageError("policy has no actions");
}

void ModelPolicyAgent::begin_episode() { state_ = start_state(model_); }

int ModelPolicyAgent::act(rng::Stream& gen) {
  if (!state_.valid) {
    state_ = start_state(model_);
    return gen.next_int(policy_.num_actions());
  }
  return policy_.greedy_action(state_.v);
}

void ModelPolicyAgent::observe(int action, int observation) {
  if (state_.valid) state_ = update_state(model_, state_, action, observation);
}

MemorylessAgent::MemorylessAgent(const Policy& policy, const Simulator& domain)
    : policy_(policy), domain_(domain), features_(Vec::Zero(domain.observation_feature_dim())) {
  if (policy.num_actions() == 0) throw UsageError("policy has no actions");
}

void MemorylessAgent::begin_episode() {
  features_ = Vec::Zero(domain_.observation_feature_dim());
}

int MemorylessAgent::act(rng::Stream& gen) {
  (void)gen;
  return policy_.greedy_action(features_);
}

void MemorylessAgent::observe(int action, int observation) {
  (void)action;
  features_ = domain_.observation_features(observation);
}

EvalMetrics eval_policy(Simulator& domain, Agent& agent, int episodes, int max_len,
                        double gamma, std::uint64_t seed) {
  if (episodes < 1) throw UsageError("evaluation needs at least one episode");
  if (max_len < 1) throw UsageError("evaluation episode cap must be positive");
  if (!(gamma > 0.0) || gamma > 1.0) throw UsageError("evaluation discount must lie in (0, 1]");
  std::vector<double> returns;
  std::vector<double> discounted;
  returns.reserve(static_cast<std::size_t>(episodes));
  discounted.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    rng::Stream gen(rng::mix(seed, static_cast<std::uint64_t>(e)));
    domain.reset(gen);
    agent.begin_episode();
    double total = 0.0;
    double disc = 0.0;
    double weight = 1.0;
    for (int t = 0; t < max_len; ++t) {
      const int action = agent.act(gen);
      const StepResult step = domain.step(action, gen);
      agent.observe(action, step.observation);
      total += step.reward;
      disc += weight * step.reward;
      weight *= gamma;
      if (step.done) break;
    }
    returns.push_back(total);
    discounted.push_back(disc);
  }
  EvalMetrics metrics;
  metrics.episodes = episodes;
  std::tie(metrics.mean_return, metrics.ci_return) = mean_with_ci(returns);
  std::tie(metrics.mean_discounted_return, metrics.ci_discounted) = mean_with_ci(discounted);
  return metrics;
}

CombinedResult run_combined(Simulator& domain, const LearnerConfig& learner_cfg,
                            const PlannerConfig& planner_cfg, std::uint64_t seed) {
  planner_cfg.validate();
  learner_cfg.validate();
  if (learner_cfg.num_actions != domain.num_actions() ||
      learner_cfg.num_observations != domain.num_observations()) {
    throw UsageError("learner alphabet does not match the domain");
  }

  CombinedResult result;
  UniformAgent uniform(domain.num_actions());
  std::vector<TransitionTuple> pool;
  bool have_model = false;

  for (int round = 0; round < planner_cfg.sampling_iterations; ++round) {
    const std::uint64_t sample_seed =
        rng::mix(rng::mix(seed, 1), static_cast<std::uint64_t>(round));
    TrajectorySet corpus;
    if (planner_cfg.greedy_sampling && have_model) {
      ModelPolicyAgent greedy(result.model, result.policy);
      EpsilonGreedyAgent explorer(greedy, planner_cfg.epsilon, domain.num_actions());
      corpus = sample_trajectories(domain, explorer, planner_cfg.model_episodes,
                                   planner_cfg.max_episode_len, sample_seed);
    } else {
      corpus = sample_trajectories(domain, uniform, planner_cfg.model_episodes,
                                   planner_cfg.max_episode_len, sample_seed);
    }

    SufficientStats stats(learner_cfg);
    stats.accumulate_corpus(corpus);
    result.model = have_model ? incremental_update(result.model, stats) : build_model(stats);
    have_model = true;

    TupleBuild built = build_tuples(result.model, corpus, planner_cfg.planning_episodes);
    const std::size_t fresh = built.tuples.size();
    pool.insert(pool.end(), std::make_move_iterator(built.tuples.begin()),
                std::make_move_iterator(built.tuples.end()));

    result.policy = fitted_q(pool, planner_cfg, domain.num_actions(),
                             rng::mix(rng::mix(seed, 2), static_cast<std::uint64_t>(round)));

    CombinedMetrics::Round metrics;
    metrics.episodes_sampled = planner_cfg.model_episodes;
    metrics.new_tuples = fresh;
    metrics.cumulative_tuples = pool.size();
    metrics.skipped_steps = built.skipped_steps;
    metrics.model_rank = result.model.svd.rank();
    result.metrics.rounds.push_back(metrics);
  }
  return result;
}

Policy memoryless_baseline(const Simulator& domain, const TrajectorySet& trajs,
                           const PlannerConfig& cfg, std::uint64_t seed) {
  TupleBuild built = build_memoryless_tuples(domain, trajs, 0);
  if (built.tuples.empty()) throw UsageError("memoryless baseline needs a non-empty corpus");
  return fitted_q(built.tuples, cfg, domain.num_actions(), seed);
}

}  // namespace cpsr
