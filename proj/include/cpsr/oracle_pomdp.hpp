#pragma once

#include <array>

#include "cpsr/linalg.hpp"
#include "cpsr/projections.hpp"
#include "cpsr/simulator.hpp"

namespace cpsr {

// Small analytic POMDP with exactly known dynamics. Belief filtering over the
// latent chain yields exact conditional test probabilities, which is what
// learned models are checked against. The default instance has full-rank
// one-step dynamics, so a rank-4 model can match it exactly.
class OraclePomdp : public Simulator {
 public:
  static constexpr int kNumStates = 4;
  // Filtering enumerations stay cheap only for short sequences.
  static constexpr int kMaxFilterLength = 8;

  // Fixed default instance (4 states, 2 actions, 2 observations).
  OraclePomdp();

  // transition[a] is states x states (row = current state), emission[a] is
  // states x observations (row = next state), start sums to 1. Every row must
  // be a probability distribution within 1e-12.
  OraclePomdp(std::array<Mat, 2> transition, std::array<Mat, 2> emission, Vec start);

  int num_actions() const override { return 2; }
  int num_observations() const override { return 2; }

  void reset(rng::Stream& gen) override;
  StepResult step(int action, rng::Stream& gen) override;

  int observation_feature_dim() const override { return 2; }
  Vec observation_features(int observation) const override;

  // Exact P(test observations | history, test actions executed), by filtering
  // the start distribution through the history and chaining the test steps.
  // Requires history.length() + test.length() <= kMaxFilterLength.
  // Throws UsageError("impossible history") when the history has probability 0.
  double test_probability(const HistoryKey& history, const TestKey& test) const;

  // Unnormalized weight of an action-observation sequence from the start
  // distribution: P(observations | actions executed). Empty sequence -> 1.
  double sequence_weight(const std::vector<int>& actions,
                         const std::vector<int>& observations) const;

  const Mat& transition(int action) const { return transition_[check_action(action)]; }
  const Mat& emission(int action) const { return emission_[check_action(action)]; }
  const Vec& start_distribution() const { return start_; }

 private:
  static int check_action(int action);
  // One filtering step: w'[s'] = sum_s w[s] T[a](s,s') E[a](s',o).
  Vec filter_step(const Vec& weights, int action, int observation) const;

  std::array<Mat, 2> transition_;
  std::array<Mat, 2> emission_;
  Vec start_;
  int state_ = 0;
};

}  // namespace cpsr
