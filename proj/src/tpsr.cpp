#include "cpsr/tpsr.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>

#include "cpsr/errors.hpp"
#include "model_common.hpp"

namespace cpsr {

namespace {

// Realized keys in first-occurrence order, looked up through their injective
// byte serializations. The empty history always lands at index 0 because the
// first prefix scanned is empty.
template <typename Key>
class Dictionary {
 public:
  int intern(const Key& key) {
    const std::string bytes = serialize_key(key);
    auto [it, inserted] = index_.try_emplace(bytes, static_cast<int>(keys_.size()));
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  int find(const Key& key) const {
    const auto it = index_.find(serialize_key(key));
    return it == index_.end() ? -1 : it->second;
  }

  std::size_t size() const { return keys_.size(); }
  std::vector<Key> take_keys() { return std::move(keys_); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<Key> keys_;
};

HistoryKey prefix_key(const Trajectory& z, std::size_t end) {
  HistoryKey key;
  key.actions.assign(z.actions.begin(), z.actions.begin() + static_cast<long>(end));
  key.observations.assign(z.observations.begin(),
                          z.observations.begin() + static_cast<long>(end));
  return key;
}

TestKey block_key(const Trajectory& z, std::size_t begin, std::size_t len) {
  TestKey key;
  key.actions.assign(z.actions.begin() + static_cast<long>(begin),
                     z.actions.begin() + static_cast<long>(begin + len));
  key.observations.assign(z.observations.begin() + static_cast<long>(begin),
                          z.observations.begin() + static_cast<long>(begin + len));
  return key;
}

std::size_t history_cap(const TpsrConfig& config, std::size_t len) {
  if (config.max_history_len < 0) return len;
  return std::min(len, static_cast<std::size_t>(config.max_history_len));
}

void check_ids(const Trajectory& z, const TpsrConfig& config) {
  z.validate();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.actions[i] < 0 || z.actions[i] >= config.num_actions) {
      throw UsageError("action id outside the configured alphabet");
    }
    if (z.observations[i] < 0 || z.observations[i] >= config.num_observations) {
      throw UsageError("observation id outside the configured alphabet");
    }
  }
}

}  // namespace

void TpsrConfig::validate() const {
  if (max_test_len < 1) throw UsageError("max_test_len must be at least 1");
  if (num_actions < 1 || num_observations < 1) {
    throw UsageError("action/observation alphabet sizes must be positive");
  }
  if (memory_budget_bytes == 0) throw UsageError("memory budget must be positive");
}

TpsrBuild build_tpsr(const std::vector<WeightedTrajectory>& corpus,
                     const TpsrConfig& config) {
  config.validate();
  if (corpus.empty()) throw UsageError("cannot build a model from an empty corpus");

  const auto m = static_cast<std::size_t>(config.max_test_len);
  Dictionary<TestKey> tests;
  Dictionary<HistoryKey> histories;
  double total_weight = 0.0;
  for (const WeightedTrajectory& record : corpus) {
    check_ids(record.z, config);
    const std::size_t len = record.z.size();
    const std::size_t cap = history_cap(config, len);
    for (std::size_t p = 0; p <= cap; ++p) {
      histories.intern(prefix_key(record.z, p));
    }
    // Blocks can start anywhere a dictionary history ends, and one symbol
    // later (the operator pass reads the block after the split symbol).
    for (std::size_t p = 0; p < len && p <= cap + 1; ++p) {
      for (std::size_t t = 1; t <= std::min(m, len - p); ++t) {
        tests.intern(block_key(record.z, p, t));
      }
    }
    total_weight += record.weight;
  }
  if (tests.size() == 0) throw UsageError("corpus realizes no tests");

  // Dense statistics plus the decomposition's working copy; refuse before
  // touching the allocator so an oversized request is an error, not an OOM.
  const std::size_t dense_bytes = 2 * tests.size() * histories.size() * sizeof(double);
  if (dense_bytes > config.memory_budget_bytes) {
    throw TpsrInfeasibleError(
        "dense statistics need about " + std::to_string(dense_bytes) + " bytes (" +
        std::to_string(tests.size()) + " tests x " + std::to_string(histories.size()) +
        " histories) against a budget of " +
        std::to_string(config.memory_budget_bytes));
  }

  const double scale =
      config.scale_constant > 0.0 ? config.scale_constant : 1.0 / total_weight;
  Vec sigma_h = Vec::Zero(static_cast<Eigen::Index>(histories.size()));
  Mat joint = Mat::Zero(static_cast<Eigen::Index>(tests.size()),
                        static_cast<Eigen::Index>(histories.size()));
  for (const WeightedTrajectory& record : corpus) {
    const Trajectory& z = record.z;
    const std::size_t len = z.size();
    for (std::size_t p = 0; p <= history_cap(config, len); ++p) {
      const int h = histories.find(prefix_key(z, p));
      sigma_h(h) += record.weight;
      for (std::size_t t = 1; t <= std::min(m, len - p); ++t) {
        joint(tests.find(block_key(z, p, t)), h) += scale * record.weight;
      }
    }
  }

  CpsrModel model;
  model.config.test_spec.dim = static_cast<int>(tests.size());
  model.config.history_spec.dim = static_cast<int>(histories.size()) - 1;
  model.config.start_mode = StartMode::unique_start;
  model.config.max_test_len = config.max_test_len;
  model.config.d_prime = config.d_prime;
  model.config.sv_tol = config.sv_tol;
  model.config.scale_constant = config.scale_constant;
  model.config.num_actions = config.num_actions;
  model.config.num_observations = config.num_observations;
  model.sigma_h = sigma_h;
  model.total_weight = total_weight;
  model.scale = scale;

  const int rank_limit =
      config.d_prime > 0
          ? config.d_prime
          : static_cast<int>(std::min(tests.size(), histories.size()));
  model.svd = thin_svd(joint, rank_limit, config.sv_tol);
  if (model.svd.rank() == 0) {
    throw NumericalError("rank collapse: no singular value above tolerance");
  }

  // Second pass: one (history, symbol, test-block) contribution per split,
  // exactly as in the compressed path but with dictionary indicators.
  for (const WeightedTrajectory& record : corpus) {
    const Trajectory& z = record.z;
    const std::size_t len = z.size();
    for (std::size_t p = 0; p < len; ++p) {
      if (p > history_cap(config, len)) break;
      const std::size_t longest = std::min(m, len - p - 1);
      if (longest == 0) continue;
      const int h = histories.find(prefix_key(z, p));
      const Vec h_coords =
          model.svd.v.row(h).transpose().cwiseQuotient(model.svd.s);
      const int key = z.actions[p] * config.num_observations + z.observations[p];
      auto [it, inserted] =
          model.c_ao.try_emplace(key, Mat::Zero(model.svd.rank(), model.svd.rank()));
      Mat& op = it->second;
      for (std::size_t t = 1; t <= longest; ++t) {
        const int row = tests.find(block_key(z, p + 1, t));
        op.noalias() += (scale * record.weight) *
                        model.svd.u.row(row).transpose() * h_coords.transpose();
      }
    }
  }
  detail::finalize_model(model);

  TpsrBuild out;
  out.model = std::move(model);
  out.tests = tests.take_keys();
  out.histories = histories.take_keys();
  return out;
}

TpsrBuild build_tpsr(const TrajectorySet& corpus, const TpsrConfig& config) {
  std::vector<WeightedTrajectory> weighted;
  weighted.reserve(corpus.size());
  for (const Trajectory& z : corpus) weighted.push_back(WeightedTrajectory{z, 1.0});
  return build_tpsr(weighted, config);
}

TpsrBuild build_tpsr(const TpsrStatistics& stats, const TpsrConfig& config) {
  config.validate();
  const auto num_tests = static_cast<Eigen::Index>(stats.tests.size());
  const auto num_histories = static_cast<Eigen::Index>(stats.histories.size());
  if (num_tests < 1 || num_histories < 1) {
    throw UsageError("injected statistics need at least one test and one history");
  }
  if (!stats.histories.front().actions.empty()) {
    throw UsageError("the first injected history must be the empty one");
  }
  if (stats.history_mass.size() != num_histories ||
      stats.joint.rows() != num_tests || stats.joint.cols() != num_histories) {
    throw UsageError("injected statistic dimensions do not match the dictionaries");
  }
  for (const auto& [key, mat] : stats.joint_ao) {
    if (key < 0 || key >= config.num_actions * config.num_observations) {
      throw UsageError("split symbol key outside the configured alphabet");
    }
    if (mat.rows() != num_tests || mat.cols() != num_histories) {
      throw UsageError("injected statistic dimensions do not match the dictionaries");
    }
  }

  const double scale = config.scale_constant > 0.0 ? config.scale_constant : 1.0;
  CpsrModel model;
  model.config.test_spec.dim = static_cast<int>(num_tests);
  model.config.history_spec.dim = static_cast<int>(num_histories) - 1;
  model.config.start_mode = StartMode::unique_start;
  model.config.max_test_len = config.max_test_len;
  model.config.d_prime = config.d_prime;
  model.config.sv_tol = config.sv_tol;
  model.config.scale_constant = config.scale_constant;
  model.config.num_actions = config.num_actions;
  model.config.num_observations = config.num_observations;
  model.sigma_h = stats.history_mass;
  model.scale = scale;

  const int rank_limit =
      config.d_prime > 0
          ? config.d_prime
          : static_cast<int>(std::min(num_tests, num_histories));
  model.svd = thin_svd(scale * stats.joint, rank_limit, config.sv_tol);
  if (model.svd.rank() == 0) {
    throw NumericalError("rank collapse: no singular value above tolerance");
  }

  const Mat basis = model.svd.v * model.svd.s.cwiseInverse().asDiagonal();
  for (const auto& [key, mat] : stats.joint_ao) {
    model.c_ao.emplace(key, model.svd.u.transpose() * (scale * mat) * basis);
  }
  detail::finalize_model(model);

  TpsrBuild out;
  out.model = std::move(model);
  out.tests = stats.tests;
  out.histories = stats.histories;
  return out;
}

}  // namespace cpsr
