#pragma once

#include <cstddef>
#include <vector>

#include "cpsr/learner.hpp"
#include "cpsr/trajectory.hpp"

namespace cpsr {

// Uncompressed baseline: the same subspace construction, but over explicit
// dictionaries of realized tests and histories instead of random features.
// Its dense test-by-history statistics matrix is what compression avoids;
// the memory guard makes the blow-up a structured error instead of an OOM.
struct TpsrConfig {
  int max_test_len = 3;
  int max_history_len = -1;  // < 0: every realized prefix enters the dictionary
  int d_prime = 0;           // retained rank; 0 means keep everything
  double sv_tol = 0.0;
  double scale_constant = 0.0;  // <= 0: use 1 / total corpus weight
  int num_actions = 0;
  int num_observations = 0;
  std::size_t memory_budget_bytes = std::size_t{8} << 30;

  void validate() const;
};

struct TpsrBuild {
  CpsrModel model;
  std::vector<TestKey> tests;         // row order of the dense statistics
  std::vector<HistoryKey> histories;  // column order; index 0 is the empty history
};

// Enumerates the realized dictionaries, materializes the dense joint-count
// matrix, and runs the usual SVD-and-second-pass construction. Throws
// TpsrInfeasibleError before allocating anything dense when the matrix plus
// decomposition workspace would exceed the memory budget.
TpsrBuild build_tpsr(const std::vector<WeightedTrajectory>& corpus,
                     const TpsrConfig& config);
TpsrBuild build_tpsr(const TrajectorySet& corpus, const TpsrConfig& config);

// Expected statistics over explicit dictionaries, for building the baseline
// from known matrices instead of a recorded corpus. joint(i, j) is the mass
// of test i in the context of history j; joint_ao[a * num_observations + o]
// holds the same mass with one (a, o) symbol between history and test.
// histories[0] must be the empty history. Feeding action-conditional
// probabilities makes the model's raw predictions action-conditional.
struct TpsrStatistics {
  std::vector<TestKey> tests;
  std::vector<HistoryKey> histories;
  Vec history_mass;                       // one entry per history
  Mat joint;                              // tests x histories
  std::unordered_map<int, Mat> joint_ao;  // same shape per split symbol
};

// Same construction from injected statistics. The matrices are already
// materialized by the caller, so there is no memory guard on this path;
// scale_constant <= 0 leaves the injected masses as they are.
TpsrBuild build_tpsr(const TpsrStatistics& stats, const TpsrConfig& config);

}  // namespace cpsr
