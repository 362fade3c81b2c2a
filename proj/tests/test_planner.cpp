#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpsr/errors.hpp"
#include "cpsr/learner.hpp"
#include "cpsr/oracle_pomdp.hpp"
#include "cpsr/planner.hpp"
#include "cpsr/rng.hpp"
#include "cpsr/sampling.hpp"
#include "cpsr/trajectory.hpp"

using cpsr::CpsrModel;
using cpsr::EvalMetrics;
using cpsr::HistoryKey;
using cpsr::LearnerConfig;
using cpsr::Mat;
using cpsr::OraclePomdp;
using cpsr::PlannerConfig;
using cpsr::Policy;
using cpsr::PredictiveState;
using cpsr::ProjectionFamily;
using cpsr::ProjectionSpec;
using cpsr::StartMode;
using cpsr::StepResult;
using cpsr::SufficientStats;
using cpsr::TestKey;
using cpsr::Trajectory;
using cpsr::TrajectorySet;
using cpsr::TransitionTuple;
using cpsr::TupleBuild;
using cpsr::UsageError;
using cpsr::Vec;

namespace {

LearnerConfig oracle_config(int dim_t, int dim_h, std::uint64_t seed_t = 11,
                            std::uint64_t seed_h = 12) {
  LearnerConfig config;
  config.test_spec = ProjectionSpec{ProjectionFamily::spherical, dim_t, seed_t, false};
  config.history_spec = ProjectionSpec{ProjectionFamily::spherical, dim_h, seed_h, false};
  config.start_mode = StartMode::unique_start;
  config.max_test_len = 3;
  config.num_actions = 2;
  config.num_observations = 2;
  return config;
}

std::vector<HistoryKey> all_histories(int max_len) {
  std::vector<HistoryKey> out;
  out.push_back(HistoryKey{});
  for (int len = 1; len <= max_len; ++len) {
    const int num = 1 << (2 * len);
    for (int code = 0; code < num; ++code) {
      HistoryKey h;
      int rest = code;
      for (int i = 0; i < len; ++i) {
        h.actions.push_back(rest & 1);
        h.observations.push_back((rest >> 1) & 1);
        rest >>= 2;
      }
      out.push_back(std::move(h));
    }
  }
  return out;
}

std::vector<TestKey> all_tests(int max_len) {
  std::vector<TestKey> out;
  for (const HistoryKey& h : all_histories(max_len)) {
    if (h.empty()) continue;
    out.push_back(TestKey{h.actions, h.observations});
  }
  return out;
}

// Exact action-conditional statistics over complete rectangular bands, as in
// the learner tests: raw predictions of the resulting model match the
// filtering oracle to numerical precision.
void inject_exact(SufficientStats& stats, const OraclePomdp& sim, int hist_band,
                  int test_band) {
  const std::vector<TestKey> tests = all_tests(test_band);
  for (const HistoryKey& h : all_histories(hist_band)) {
    const double mass_h = sim.sequence_weight(h.actions, h.observations);
    if (mass_h <= 0.0) continue;
    stats.add_history_mass(h, mass_h);
    for (const TestKey& tau : tests) {
      std::vector<int> joint_a = h.actions;
      std::vector<int> joint_o = h.observations;
      joint_a.insert(joint_a.end(), tau.actions.begin(), tau.actions.end());
      joint_o.insert(joint_o.end(), tau.observations.begin(), tau.observations.end());
      const double mass_joint = sim.sequence_weight(joint_a, joint_o);
      if (mass_joint > 0.0) stats.add_joint_mass(h, tau, mass_joint);
      for (int a = 0; a < sim.num_actions(); ++a) {
        for (int o = 0; o < sim.num_observations(); ++o) {
          std::vector<int> split_a = h.actions;
          std::vector<int> split_o = h.observations;
          split_a.push_back(a);
          split_o.push_back(o);
          split_a.insert(split_a.end(), tau.actions.begin(), tau.actions.end());
          split_o.insert(split_o.end(), tau.observations.begin(), tau.observations.end());
          const double mass_split = sim.sequence_weight(split_a, split_o);
          if (mass_split > 0.0) stats.add_split_mass(h, a, o, tau, mass_split);
        }
      }
    }
  }
}

CpsrModel exact_oracle_model(const OraclePomdp& sim) {
  LearnerConfig config = oracle_config(20, 20);
  config.scale_constant = 1.0;
  SufficientStats stats(config);
  inject_exact(stats, sim, 3, 3);
  return cpsr::build_model(stats);
}

// A 4-state chain with identity transitions and parity-deterministic
// emissions: the first observation fixes the parity, so any later flip is an
// impossible event under the exact model.
OraclePomdp parity_chain() {
  Mat eye = Mat::Identity(4, 4);
  Mat parity(4, 2);
  parity << 1, 0, 0, 1, 1, 0, 0, 1;
  Vec start(4);
  start << 0.5, 0.25, 0.15, 0.1;
  return OraclePomdp({eye, eye}, {parity, parity}, start);
}

Trajectory make_traj(std::vector<int> actions, std::vector<int> observations,
                     std::vector<double> rewards) {
  Trajectory z;
  z.actions = std::move(actions);
  z.observations = std::move(observations);
  z.rewards = std::move(rewards);
  return z;
}

// Fully observable two-state toggle task: action 1 flips the hidden state,
// action 0 keeps it, the observation reveals the state, and landing in state
// 1 pays 1. Optimal control collects a reward every step.
class ToggleChain : public cpsr::Simulator {
 public:
  int num_actions() const override { return 2; }
  int num_observations() const override { return 2; }
  void reset(cpsr::rng::Stream&) override { state_ = 0; }
  StepResult step(int action, cpsr::rng::Stream&) override {
    if (action < 0 || action >= 2) throw UsageError("action id out of range");
    if (action == 1) state_ = 1 - state_;
    StepResult result;
    result.observation = state_;
    result.reward = state_ == 1 ? 1.0 : 0.0;
    return result;
  }
  int observation_feature_dim() const override { return 2; }
  Vec observation_features(int observation) const override {
    if (observation < 0 || observation >= 2) throw UsageError("observation id out of range");
    Vec v = Vec::Zero(2);
    v(observation) = 1.0;
    return v;
  }

 private:
  int state_ = 0;
};

// Emits observation t mod 2 regardless of actions; no model with
// parity-locked observations can follow it for long.
class AlternatingSim : public cpsr::Simulator {
 public:
  int num_actions() const override { return 2; }
  int num_observations() const override { return 2; }
  void reset(cpsr::rng::Stream&) override { t_ = 0; }
  StepResult step(int, cpsr::rng::Stream&) override {
    StepResult result;
    result.observation = t_ % 2;
    ++t_;
    return result;
  }
  int observation_feature_dim() const override { return 2; }
  Vec observation_features(int observation) const override {
    Vec v = Vec::Zero(2);
    v(observation) = 1.0;
    return v;
  }

 private:
  int t_ = 0;
};

PlannerConfig small_config() {
  PlannerConfig cfg;
  cfg.gamma = 0.85;
  cfg.fitted_q_iterations = 10;
  cfg.trees_per_action = 10;
  cfg.model_episodes = 80;
  cfg.planning_episodes = 40;
  cfg.sampling_iterations = 1;
  cfg.max_episode_len = 8;
  cfg.min_node_size = 2;
  return cfg;
}

std::vector<TransitionTuple> random_tuples(int count, int dim, int num_actions,
                                           std::uint64_t seed) {
  cpsr::rng::Stream gen(seed);
  std::vector<TransitionTuple> tuples;
  for (int i = 0; i < count; ++i) {
    TransitionTuple t;
    t.state = Vec(dim);
    t.next_state = Vec(dim);
    for (int j = 0; j < dim; ++j) {
      t.state(j) = gen.next_gaussian();
      t.next_state(j) = gen.next_gaussian();
    }
    t.action = gen.next_int(num_actions);
    t.reward = gen.next_gaussian();
    tuples.push_back(std::move(t));
  }
  return tuples;
}

}  // namespace

TEST_CASE("tuples chain through an episode") {
  const OraclePomdp sim;
  const CpsrModel model = exact_oracle_model(sim);
  TrajectorySet trajs;
  trajs.push_back(make_traj({0, 1, 0}, {1, 0, 1}, {0.5, -1.0, 2.0}));

  const TupleBuild build = cpsr::build_tuples(model, trajs, 0);
  REQUIRE(build.tuples.size() == 3);
  CHECK(build.skipped_steps == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(build.tuples[i].action == trajs[0].actions[i]);
    CHECK(build.tuples[i].reward == trajs[0].rewards[i]);
    CHECK_FALSE(build.tuples[i].terminal);
  }
  // Exact chaining: the successor state of tuple i is the state of tuple i+1.
  for (std::size_t i = 0; i + 1 < 3; ++i) {
    CHECK((build.tuples[i].next_state - build.tuples[i + 1].state).norm() == 0.0);
  }
  // The first state is the model's start state.
  CHECK((build.tuples[0].state - cpsr::start_state(model).v).norm() == 0.0);
}

TEST_CASE("tuple states match the filtering oracle") {
  const OraclePomdp sim;
  const CpsrModel model = exact_oracle_model(sim);
  TrajectorySet trajs;
  trajs.push_back(make_traj({0, 1, 1, 0}, {1, 0, 0, 1}, {0, 0, 0, 0}));

  const TupleBuild build = cpsr::build_tuples(model, trajs, 0);
  REQUIRE(build.tuples.size() == 4);

  // Each tuple state, fed through the exact model, must reproduce the
  // oracle's conditional test probabilities for the history it encodes.
  for (std::size_t i = 0; i < build.tuples.size(); ++i) {
    HistoryKey h;
    h.actions.assign(trajs[0].actions.begin(),
                     trajs[0].actions.begin() + static_cast<std::ptrdiff_t>(i));
    h.observations.assign(trajs[0].observations.begin(),
                          trajs[0].observations.begin() + static_cast<std::ptrdiff_t>(i));
    PredictiveState state;
    state.v = build.tuples[i].state;
    state.history_length = static_cast<int>(i);
    for (const TestKey& tau : all_tests(2)) {
      const double expected = sim.test_probability(h, tau);
      CHECK(cpsr::predict_test(model, state, tau) == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("steps after a filtering failure are skipped and counted") {
  const OraclePomdp chain = parity_chain();
  LearnerConfig config = oracle_config(16, 16, 21, 22);
  config.scale_constant = 1.0;
  SufficientStats stats(config);
  inject_exact(stats, chain, 3, 3);
  const CpsrModel model = cpsr::build_model(stats);

  // Parity flips after the first observation are impossible: the second step
  // kills the state, so of three steps only the first yields a tuple.
  TrajectorySet trajs;
  trajs.push_back(make_traj({0, 0, 0}, {1, 0, 1}, {1.0, 1.0, 1.0}));
  const TupleBuild build = cpsr::build_tuples(model, trajs, 0);
  CHECK(build.tuples.size() == 1);
  CHECK(build.skipped_steps == 2);
}

TEST_CASE("tuple construction respects the trajectory limit and reward requirement") {
  const OraclePomdp sim;
  const CpsrModel model = exact_oracle_model(sim);
  TrajectorySet trajs;
  trajs.push_back(make_traj({0, 1}, {1, 0}, {0, 0}));
  trajs.push_back(make_traj({1}, {0}, {1}));
  trajs.push_back(make_traj({0, 0, 1}, {1, 1, 0}, {0, 0, 0}));

  CHECK(cpsr::build_tuples(model, trajs, 2).tuples.size() == 3);
  CHECK(cpsr::build_tuples(model, trajs, 0).tuples.size() == 6);
  CHECK(cpsr::build_tuples(model, TrajectorySet{}, 0).tuples.empty());

  TrajectorySet no_rewards;
  no_rewards.push_back(Trajectory{{0}, {1}, {}, {}, false});
  CHECK_THROWS_AS(cpsr::build_tuples(model, no_rewards, 0), UsageError);
}

TEST_CASE("terminal flags mark hard endings and teleports") {
  const OraclePomdp sim;
  const CpsrModel model = exact_oracle_model(sim);

  Trajectory z = make_traj({0, 1, 0}, {1, 0, 1}, {0, 1, 0});
  z.resets = {0, 1, 0};
  z.terminated = true;
  TrajectorySet trajs{z};

  const TupleBuild build = cpsr::build_tuples(model, trajs, 0);
  REQUIRE(build.tuples.size() == 3);
  CHECK_FALSE(build.tuples[0].terminal);
  CHECK(build.tuples[1].terminal);  // teleport back to the start configuration
  CHECK(build.tuples[2].terminal);  // hard episode end
}

TEST_CASE("one fitted-Q round at zero discount is immediate-reward regression") {
  const int num_actions = 3;
  const std::vector<TransitionTuple> tuples = random_tuples(200, 3, num_actions, 7001);

  PlannerConfig cfg;
  cfg.gamma = 0.0;
  cfg.trees_per_action = 7;
  cfg.min_node_size = 4;
  cfg.model_episodes = 1;
  cfg.planning_episodes = 1;

  for (const int rounds : {1, 4}) {
    cfg.fitted_q_iterations = rounds;
    const Policy policy = cpsr::fitted_q(tuples, cfg, num_actions, 99);

    cpsr::ExtraTreesParams params;
    params.num_trees = 7;
    params.min_node_size = 4;
    for (int a = 0; a < num_actions; ++a) {
      std::vector<const TransitionTuple*> mine;
      for (const TransitionTuple& t : tuples) {
        if (t.action == a) mine.push_back(&t);
      }
      Mat x(static_cast<Eigen::Index>(mine.size()), 3);
      Vec y(static_cast<Eigen::Index>(mine.size()));
      for (std::size_t r = 0; r < mine.size(); ++r) {
        x.row(static_cast<Eigen::Index>(r)) = mine[r]->state.transpose();
        y(static_cast<Eigen::Index>(r)) = mine[r]->reward;
      }
      // The final round fits with seed mix(mix(seed, rounds), action); with
      // zero discount every round sees the same targets, so the policy must
      // equal the plain regression bit for bit.
      const cpsr::Ensemble direct = cpsr::fit_extra_trees(
          x, y, params,
          cpsr::rng::mix(cpsr::rng::mix(99, static_cast<std::uint64_t>(rounds)),
                         static_cast<std::uint64_t>(a)));
      cpsr::rng::Stream gen(555);
      for (int probe = 0; probe < 20; ++probe) {
        Vec p(3);
        for (int j = 0; j < 3; ++j) p(j) = gen.next_gaussian();
        CHECK(policy.value(p, a) == direct.predict(p));
      }
    }
  }
}

TEST_CASE("zero rewards give a zero policy with lowest-id ties") {
  std::vector<TransitionTuple> tuples = random_tuples(120, 2, 2, 42);
  for (TransitionTuple& t : tuples) t.reward = 0.0;

  PlannerConfig cfg = small_config();
  cfg.fitted_q_iterations = 5;
  const Policy policy = cpsr::fitted_q(tuples, cfg, 2, 7);

  cpsr::rng::Stream gen(8);
  for (int probe = 0; probe < 20; ++probe) {
    Vec p(2);
    p << gen.next_gaussian(), gen.next_gaussian();
    CHECK(policy.value(p, 0) == 0.0);
    CHECK(policy.value(p, 1) == 0.0);
    CHECK(policy.greedy_action(p) == 0);
  }
}

TEST_CASE("fitted-Q approaches the value-iteration fixed point on a toy task") {
  // Deterministic two-state task encoded directly as tuples: action 1 flips
  // the 0/1 state, action 0 keeps it, landing in state 1 pays 1.
  const double gamma = 0.85;
  auto reward = [](int state, int action) {
    const int next = action == 1 ? 1 - state : state;
    return next == 1 ? 1.0 : 0.0;
  };
  auto successor = [](int state, int action) { return action == 1 ? 1 - state : state; };

  std::vector<TransitionTuple> tuples;
  for (int copy = 0; copy < 30; ++copy) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        TransitionTuple t;
        t.state = Vec::Constant(1, static_cast<double>(s));
        t.action = a;
        t.reward = reward(s, a);
        t.next_state = Vec::Constant(1, static_cast<double>(successor(s, a)));
        tuples.push_back(std::move(t));
      }
    }
  }

  // Reference solution by plain value iteration on the same four pairs.
  double q_star[2][2] = {{0, 0}, {0, 0}};
  for (int iter = 0; iter < 400; ++iter) {
    double next[2][2];
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int s2 = successor(s, a);
        next[s][a] = reward(s, a) + gamma * std::max(q_star[s2][0], q_star[s2][1]);
      }
    }
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) q_star[s][a] = next[s][a];
    }
  }

  PlannerConfig cfg;
  cfg.gamma = gamma;
  cfg.fitted_q_iterations = 50;
  cfg.trees_per_action = 10;
  cfg.min_node_size = 2;
  const Policy policy = cpsr::fitted_q(tuples, cfg, 2, 31);

  for (int s = 0; s < 2; ++s) {
    const Vec state = Vec::Constant(1, static_cast<double>(s));
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(policy.value(state, a) - q_star[s][a]) <= 0.05);
    }
  }
  CHECK(policy.greedy_action(Vec::Constant(1, 0.0)) == 1);  // flip into the paying state
  CHECK(policy.greedy_action(Vec::Constant(1, 1.0)) == 0);  // stay there
}

TEST_CASE("actions without tuples keep the constant-zero value") {
  std::vector<TransitionTuple> tuples = random_tuples(80, 2, 2, 17);
  PlannerConfig cfg = small_config();
  cfg.fitted_q_iterations = 3;

  // Declare three actions but only feed tuples for 0 and 1.
  const Policy policy = cpsr::fitted_q(tuples, cfg, 3, 5);
  REQUIRE(policy.actions_without_data.size() == 1);
  CHECK(policy.actions_without_data[0] == 2);
  Vec probe(2);
  probe << 0.3, -0.7;
  CHECK(policy.value(probe, 2) == 0.0);
}

TEST_CASE("constant reward shifts leave the myopic argmax unchanged") {
  const int num_actions = 3;
  std::vector<TransitionTuple> tuples = random_tuples(300, 2, num_actions, 909);
  // Well-separated per-action reward levels plus state-dependent ripple.
  for (TransitionTuple& t : tuples) {
    t.reward = static_cast<double>(t.action) + 0.2 * std::sin(3.0 * t.state(0));
  }

  PlannerConfig cfg;
  cfg.gamma = 0.0;
  cfg.fitted_q_iterations = 1;
  cfg.trees_per_action = 9;
  cfg.min_node_size = 3;

  const Policy base = cpsr::fitted_q(tuples, cfg, num_actions, 12);
  std::vector<TransitionTuple> shifted = tuples;
  for (TransitionTuple& t : shifted) t.reward += 4.0;
  const Policy moved = cpsr::fitted_q(shifted, cfg, num_actions, 12);

  cpsr::rng::Stream gen(3);
  for (int probe = 0; probe < 20; ++probe) {
    Vec p(2);
    p << gen.next_gaussian(), gen.next_gaussian();
    CHECK(base.greedy_action(p) == moved.greedy_action(p));
    // The values themselves move by the shift.
    for (int a = 0; a < num_actions; ++a) {
      CHECK(moved.value(p, a) - base.value(p, a) == doctest::Approx(4.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("fitted-Q validates its inputs") {
  PlannerConfig cfg = small_config();
  CHECK_THROWS_AS(cpsr::fitted_q({}, cfg, 2, 1), UsageError);

  std::vector<TransitionTuple> tuples = random_tuples(20, 2, 2, 3);
  CHECK_THROWS_AS(cpsr::fitted_q(tuples, cfg, 0, 1), UsageError);

  std::vector<TransitionTuple> bad_action = tuples;
  bad_action[3].action = 9;
  CHECK_THROWS_AS(cpsr::fitted_q(bad_action, cfg, 2, 1), UsageError);

  std::vector<TransitionTuple> bad_dim = tuples;
  bad_dim[5].next_state = Vec::Zero(4);
  CHECK_THROWS_AS(cpsr::fitted_q(bad_dim, cfg, 2, 1), UsageError);

  std::vector<TransitionTuple> bad_value = tuples;
  bad_value[1].reward = std::nan("");
  CHECK_THROWS_AS(cpsr::fitted_q(bad_value, cfg, 2, 1), UsageError);

  PlannerConfig bad_cfg = small_config();
  bad_cfg.gamma = 1.0;
  CHECK_THROWS_AS(cpsr::fitted_q(tuples, bad_cfg, 2, 1), UsageError);
  bad_cfg = small_config();
  bad_cfg.model_episodes = 3;
  bad_cfg.planning_episodes = 9;
  CHECK_THROWS_AS(cpsr::fitted_q(tuples, bad_cfg, 2, 1), UsageError);
}

TEST_CASE("policy rollouts survive filtering failures") {
  const OraclePomdp chain = parity_chain();
  LearnerConfig config = oracle_config(16, 16, 21, 22);
  config.scale_constant = 1.0;
  SufficientStats stats(config);
  inject_exact(stats, chain, 3, 3);
  const CpsrModel model = cpsr::build_model(stats);

  // Any zero-reward tuple set gives a legal policy for the rollout.
  TrajectorySet trajs;
  trajs.push_back(make_traj({0, 1}, {1, 1}, {0, 0}));
  const Policy policy = cpsr::fitted_q(cpsr::build_tuples(model, trajs, 0).tuples,
                                       small_config(), 2, 4);

  // The environment alternates observations every step, which the
  // parity-locked model finds impossible from the second step on; the agent
  // must fall back to uniform actions and keep the episode going.
  AlternatingSim sim;
  cpsr::ModelPolicyAgent agent(model, policy);
  const EvalMetrics metrics = cpsr::eval_policy(sim, agent, 6, 12, 0.95, 77);
  CHECK(metrics.episodes == 6);
  CHECK(std::isfinite(metrics.mean_return));
  CHECK(metrics.mean_return == 0.0);
}

TEST_CASE("evaluation is reproducible and reports zero returns exactly") {
  OraclePomdp sim;  // every step rewards 0
  cpsr::UniformAgent agent(sim.num_actions());
  const EvalMetrics a = cpsr::eval_policy(sim, agent, 25, 10, 0.9, 123);
  const EvalMetrics b = cpsr::eval_policy(sim, agent, 25, 10, 0.9, 123);
  CHECK(a.mean_return == 0.0);
  CHECK(a.mean_discounted_return == 0.0);
  CHECK(a.ci_return == 0.0);
  CHECK(a.episodes == 25);
  CHECK(a.mean_return == b.mean_return);
  CHECK(a.ci_discounted == b.ci_discounted);

  CHECK_THROWS_AS(cpsr::eval_policy(sim, agent, 0, 10, 0.9, 1), UsageError);
  CHECK_THROWS_AS(cpsr::eval_policy(sim, agent, 5, 0, 0.9, 1), UsageError);
  CHECK_THROWS_AS(cpsr::eval_policy(sim, agent, 5, 10, 1.5, 1), UsageError);
}

TEST_CASE("memoryless baseline masters a fully observable task") {
  ToggleChain sim;
  cpsr::UniformAgent uniform(sim.num_actions());
  const TrajectorySet corpus = cpsr::sample_trajectories(sim, uniform, 150, 10, 501);

  PlannerConfig cfg = small_config();
  cfg.fitted_q_iterations = 25;
  cfg.trees_per_action = 15;
  const Policy policy = cpsr::memoryless_baseline(sim, corpus, cfg, 61);

  // Optimal play: flip into the paying state, then hold it.
  CHECK(policy.greedy_action(Vec::Zero(2)) == 1);          // before any observation
  CHECK(policy.greedy_action(sim.observation_features(0)) == 1);
  CHECK(policy.greedy_action(sim.observation_features(1)) == 0);

  cpsr::MemorylessAgent agent(policy, sim);
  const EvalMetrics metrics = cpsr::eval_policy(sim, agent, 20, 20, 0.95, 99);
  // Deterministic domain and policy: a reward on every one of the 20 steps.
  CHECK(metrics.mean_return == doctest::Approx(20.0));
  CHECK(metrics.ci_return == 0.0);

  // A zero-reward corpus leaves the baseline indifferent, tied to action 0.
  OraclePomdp flat;
  cpsr::UniformAgent flat_uniform(flat.num_actions());
  const TrajectorySet flat_corpus = cpsr::sample_trajectories(flat, flat_uniform, 40, 6, 502);
  const Policy indifferent = cpsr::memoryless_baseline(flat, flat_corpus, cfg, 62);
  CHECK(indifferent.greedy_action(flat.observation_features(0)) == 0);
  CHECK(indifferent.greedy_action(flat.observation_features(1)) == 0);
}

TEST_CASE("the combined loop is deterministic and beats random play") {
  ToggleChain sim;
  LearnerConfig lcfg = oracle_config(16, 16, 31, 32);
  lcfg.max_test_len = 2;
  lcfg.d_prime = 2;

  PlannerConfig pcfg = small_config();

  const cpsr::CombinedResult first = cpsr::run_combined(sim, lcfg, pcfg, 2024);
  const cpsr::CombinedResult second = cpsr::run_combined(sim, lcfg, pcfg, 2024);

  REQUIRE(first.metrics.rounds.size() == 1);
  const auto& round = first.metrics.rounds[0];
  CHECK(round.episodes_sampled == pcfg.model_episodes);
  CHECK(round.cumulative_tuples == round.new_tuples);
  // Every sampled planning step becomes a tuple or is counted as skipped.
  CHECK(round.new_tuples + round.skipped_steps ==
        static_cast<std::size_t>(pcfg.planning_episodes * pcfg.max_episode_len));
  CHECK(round.model_rank == 2);

  // Bitwise reproducibility of the learned values.
  cpsr::rng::Stream gen(40);
  for (int probe = 0; probe < 10; ++probe) {
    Vec p(first.model.dim());
    for (int j = 0; j < first.model.dim(); ++j) p(j) = gen.next_gaussian();
    for (int a = 0; a < 2; ++a) CHECK(first.policy.value(p, a) == second.policy.value(p, a));
    CHECK(first.policy.greedy_action(p) == second.policy.greedy_action(p));
  }

  // The planned controller collects far more reward than uniform play.
  cpsr::ModelPolicyAgent planned(first.model, first.policy);
  cpsr::UniformAgent uniform(sim.num_actions());
  const EvalMetrics planned_metrics = cpsr::eval_policy(sim, planned, 40, 8, 0.95, 71);
  const EvalMetrics random_metrics = cpsr::eval_policy(sim, uniform, 40, 8, 0.95, 71);
  CHECK(planned_metrics.mean_return >= random_metrics.mean_return + 1.0);
}

TEST_CASE("later rounds grow the cumulative tuple set") {
  ToggleChain sim;
  LearnerConfig lcfg = oracle_config(16, 16, 31, 32);
  lcfg.max_test_len = 2;
  lcfg.d_prime = 2;

  PlannerConfig pcfg = small_config();
  pcfg.sampling_iterations = 2;
  pcfg.greedy_sampling = true;
  pcfg.epsilon = 0.3;
  pcfg.fitted_q_iterations = 5;

  const cpsr::CombinedResult result = cpsr::run_combined(sim, lcfg, pcfg, 88);
  REQUIRE(result.metrics.rounds.size() == 2);
  const auto& r0 = result.metrics.rounds[0];
  const auto& r1 = result.metrics.rounds[1];
  CHECK(r1.cumulative_tuples == r0.cumulative_tuples + r1.new_tuples);
  CHECK(r1.cumulative_tuples > r0.cumulative_tuples);
  CHECK(r1.model_rank == 2);
}
