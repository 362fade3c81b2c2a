#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cpsr/linalg.hpp"
#include "cpsr/projections.hpp"
#include "cpsr/trajectory.hpp"

namespace cpsr {

// Everything a model build needs to know: the two projection families, the
// start-state convention, how long the probed futures are, and the final
// model dimension. test_spec.dim and history_spec.dim are the compressed
// dimensions of the future/past feature maps.
struct LearnerConfig {
  ProjectionSpec test_spec;
  ProjectionSpec history_spec;
  StartMode start_mode = StartMode::unique_start;
  int max_test_len = 3;
  int d_prime = 0;          // retained rank; 0 means keep everything
  double sv_tol = 0.0;      // singular values at or below this are dropped
  double scale_constant = 0.0;  // <= 0: use 1 / total corpus weight
  int num_actions = 0;
  int num_observations = 0;
  std::size_t cache_capacity = kDefaultCacheCapacity;

  void validate() const;
  int effective_rank_limit() const;
};

struct WeightedTrajectory {
  Trajectory z;
  double weight = 1.0;
};

// One (history, next symbol, following block) triple with an explicit mass,
// used when expected statistics are fed in directly instead of estimated
// from recorded trajectories.
struct WeightedSplit {
  HistoryKey history;
  int action = 0;
  int observation = 0;
  TestKey test;
  double weight = 1.0;
};

// First estimation pass plus the recorded corpus for the second pass.
//
// For a trajectory z and probe length cap m, every prefix h of z (the empty
// one included) contributes phi'_H(h) to sigma_h, and every split of z into
// (prefix h, following block tau) with 1 <= |tau| <= m contributes
// phi_T(tau) outer phi'_H(h) to sigma_th. Records are kept so operator
// estimation can re-scan the data instead of caching per-pair statistics.
//
// Two feeding modes:
//  - accumulate() consumes sampled trajectories (optionally weighted). The
//    resulting masses include the behavior policy's action probabilities, so
//    raw predictions of the built model are scaled by the policy probability
//    of the test's actions; per-action normalization (observation_conditional,
//    log_likelihood) cancels that factor.
//  - add_history_mass / add_joint_mass / add_split_mass inject expected
//    masses for explicit (history, test) bands directly. Feeding
//    action-conditional probabilities here yields a model whose raw
//    predictions are action-conditional themselves. Injected statistics carry
//    no corpus weight, so builds from them need scale_constant set.
// Both modes can be mixed; sums are over everything fed in.
class SufficientStats {
 public:
  explicit SufficientStats(const LearnerConfig& config);

  void accumulate(const Trajectory& z) { accumulate(z, 1.0); }
  void accumulate(const Trajectory& z, double weight);
  void accumulate_corpus(const TrajectorySet& corpus);

  // Direct injection of expected statistics. add_history_mass adds
  // weight * phi'_H(h) to sigma_h; add_joint_mass adds
  // weight * phi_T(tau) outer phi'_H(h) to sigma_th; add_split_mass records
  // an (h, ao, tau) triple for the operator pass. Callers are responsible
  // for feeding consistent bands: the same history set in all three sums and
  // the same test set in the joint and split sums.
  void add_history_mass(const HistoryKey& h, double weight);
  void add_joint_mass(const HistoryKey& h, const TestKey& tau, double weight);
  void add_split_mass(const HistoryKey& h, int action, int observation, const TestKey& tau,
                      double weight);

  // Merging shards gives the same sums as one sequential pass.
  void merge(const SufficientStats& other);

  const LearnerConfig& config() const { return config_; }
  const Vec& sigma_h() const { return sigma_h_; }
  const Mat& sigma_th() const { return sigma_th_; }
  const std::vector<WeightedTrajectory>& records() const { return records_; }
  const std::vector<WeightedSplit>& splits() const { return splits_; }
  std::size_t num_trajectories() const { return records_.size(); }
  double total_weight() const { return total_weight_; }
  bool empty() const { return records_.empty() && splits_.empty() && num_injections_ == 0; }

  Projector& projector() { return projector_; }

 private:
  LearnerConfig config_;
  Projector projector_;
  Vec sigma_h_;    // dim d_H + 1
  Mat sigma_th_;   // d_T x (d_H + 1)
  std::vector<WeightedTrajectory> records_;
  std::vector<WeightedSplit> splits_;
  double total_weight_ = 0.0;
  std::size_t num_injections_ = 0;  // add_history_mass / add_joint_mass calls
};

// Learned predictive model. Predictions chain the per-symbol operators:
//   P(tau | h_t) = c_inf . C_(a_n o_n) ... C_(a_1 o_1) c_t,
// with c_t the filtered state (c_start at the beginning; c_inf . c_t = 1).
// The same shape serves the compressed learner and the uncompressed baseline.
struct CpsrModel {
  LearnerConfig config;
  SvdFactors svd;         // factors of the scaled sigma_th
  Vec sigma_h;            // retained for incremental updates
  double total_weight = 0.0;
  double scale = 1.0;     // the constant actually applied to the statistics

  Vec c_start;            // filtered start state, normalized against c_inf
  Vec c_inf;
  std::unordered_map<int, Mat> c_ao;  // key: action * num_observations + obs
  Mat c_star;             // sum of all c_ao
  Mat zero_operator;      // returned for pairs absent from c_ao

  int dim() const { return static_cast<int>(c_start.size()); }
  int ao_key(int action, int observation) const;
  // The operator for one (action, observation) pair; a shared zero matrix if
  // that pair never occurred in training.
  const Mat& operator_at(int action, int observation) const;
};

struct PredictiveState {
  Vec v;
  int history_length = 0;
  bool valid = true;
};

// Builds the model from accumulated statistics: scale, thin SVD to the
// configured rank, state/normalization vectors, then a second pass over the
// records for the per-symbol operators. Throws NumericalError("rank
// collapse") when no singular value survives the threshold.
CpsrModel build_model(SufficientStats& stats);

// Folds new statistics into an existing model without touching the old data:
// the SVD is updated incrementally with the new data's contribution, old
// operators are projected onto the new basis, and the new records' operator
// contributions are added on top. c_start and c_inf are recomputed from the
// updated factors. The new statistics must use the model's projection specs.
CpsrModel incremental_update(const CpsrModel& model, SufficientStats& stats_new);

PredictiveState start_state(const CpsrModel& model);

// One filtering step: c' = C_ao c / (c_inf . C_ao c). A near-zero normalizer
// (the model assigns this observation no probability) yields an invalid
// state instead of a division blow-up.
PredictiveState update_state(const CpsrModel& model, const PredictiveState& state, int action,
                             int observation);

// Probability that the test's observations occur when its actions are
// executed from the given state. Raw operator-chain value: slightly outside
// [0,1] is possible and preserved; clamp only when reporting.
double predict_test(const CpsrModel& model, const PredictiveState& state, const TestKey& test);

// n-step lookahead: the chance of seeing o on step n when a is executed then,
// with the n-1 intervening steps marginalized through the summed operator.
double predict_nstep(const CpsrModel& model, const PredictiveState& state, int action,
                     int observation, int steps);

// Distribution over the next observation given the action, from the raw
// one-step predictions normalized to sum to one. Normalizing makes the value
// action-conditional regardless of how the training masses were weighted.
// Falls back to uniform when the raw mass is not usable (invalid state, or
// total mass at or below zero).
Vec observation_conditional(const CpsrModel& model, const PredictiveState& state, int action);

struct LikelihoodResult {
  double mean_log_prob = 0.0;
  std::int64_t floor_hits = 0;  // per-step conditionals floored at 1e-12
};

// Mean over the corpus of ln P(first `horizon` observations | actions). Each
// sequence is scored stepwise: the state is filtered forward and every step
// contributes the normalized conditional of the observed symbol given the
// action. Steps whose conditional falls below 1e-12 (everything after the
// state becomes invalid included) are floored there and counted.
LikelihoodResult log_likelihood(const CpsrModel& model, const TrajectorySet& eval_set,
                                int horizon);

}  // namespace cpsr
