#include "cpsr/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>

#include "cpsr/errors.hpp"
#include "model_common.hpp"

namespace cpsr {

namespace {

constexpr double kStateNormFloor = 1e-12;
constexpr double kLikelihoodFloor = 1e-12;

// Trajectory slices as feature-map keys. end is exclusive; begin <= end.
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

bool specs_match(const LearnerConfig& a, const LearnerConfig& b) {
  return a.test_spec == b.test_spec && a.history_spec == b.history_spec &&
         a.start_mode == b.start_mode && a.max_test_len == b.max_test_len &&
         a.num_actions == b.num_actions && a.num_observations == b.num_observations;
}

void check_symbol(const LearnerConfig& config, int action, int observation) {
  if (action < 0 || action >= config.num_actions) {
    throw UsageError("action id outside the configured alphabet");
  }
  if (observation < 0 || observation >= config.num_observations) {
    throw UsageError("observation id outside the configured alphabet");
  }
}

void check_history_key(const LearnerConfig& config, const HistoryKey& h) {
  if (h.actions.size() != h.observations.size()) {
    throw UsageError("history key has mismatched action/observation lengths");
  }
  for (std::size_t i = 0; i < h.length(); ++i) {
    check_symbol(config, h.actions[i], h.observations[i]);
  }
}

void check_test_key(const LearnerConfig& config, const TestKey& tau) {
  if (tau.actions.size() != tau.observations.size()) {
    throw UsageError("test key has mismatched action/observation lengths");
  }
  if (tau.length() < 1) throw UsageError("test key must have at least one step");
  if (tau.length() > static_cast<std::size_t>(config.max_test_len)) {
    throw UsageError("test key longer than max_test_len");
  }
  for (std::size_t i = 0; i < tau.length(); ++i) {
    check_symbol(config, tau.actions[i], tau.observations[i]);
  }
}

void check_weight(double weight) {
  if (!std::isfinite(weight)) throw UsageError("statistic weight must be finite");
}

// Adds each (history, symbol, test-block) split of the recorded corpus to the
// per-symbol operator sums, against the given SVD basis. Contributions are
// weighted by scale * record-weight; this is the estimation second pass.
void add_operator_terms(std::unordered_map<int, Mat>& ops, SufficientStats& stats,
                        const SvdFactors& svd, double scale, int num_observations,
                        int rank) {
  Projector& proj = stats.projector();
  const int m = stats.config().max_test_len;
  for (const WeightedTrajectory& record : stats.records()) {
    const Trajectory& z = record.z;
    const std::size_t len = z.size();
    for (std::size_t p = 0; p < len; ++p) {
      const std::size_t longest = std::min<std::size_t>(
          static_cast<std::size_t>(m), len - p - 1);
      if (longest == 0) continue;
      const Vec h_coords = detail::history_coords(svd, proj.history(prefix_key(z, p)));
      const int key = z.actions[p] * num_observations + z.observations[p];
      auto [it, inserted] = ops.try_emplace(key, Mat::Zero(rank, rank));
      Mat& op = it->second;
      for (std::size_t t = 1; t <= longest; ++t) {
        const Vec u_coords = svd.u.transpose() * proj.test(block_key(z, p + 1, t));
        op.noalias() += (scale * record.weight) * u_coords * h_coords.transpose();
      }
    }
  }
  for (const WeightedSplit& split : stats.splits()) {
    const Vec h_coords = detail::history_coords(svd, proj.history(split.history));
    const Vec u_coords = svd.u.transpose() * proj.test(split.test);
    const int key = split.action * num_observations + split.observation;
    auto [it, inserted] = ops.try_emplace(key, Mat::Zero(rank, rank));
    it->second.noalias() += (scale * split.weight) * u_coords * h_coords.transpose();
  }
}

Vec normalization_vector(const SvdFactors& svd, const Vec& sigma_h) {
  return detail::history_coords(svd, sigma_h);
}

Vec start_vector(const SvdFactors& svd, const Vec& sigma_h, const Vec& c_inf,
                 StartMode mode) {
  Vec e;
  if (mode == StartMode::unique_start) {
    e = Vec::Zero(sigma_h.size());
    e(0) = 1.0;
  } else {
    // No distinguished start history: use the empirical mixture of training
    // histories. Its overall mass cancels in the normalization below.
    e = sigma_h;
  }
  Vec c_start = svd.v.transpose() * e;
  c_start = c_start.cwiseProduct(svd.s);
  const double mass = c_inf.dot(c_start);
  if (std::abs(mass) < kStateNormFloor) {
    throw NumericalError("degenerate start state: zero mass under the normalization vector");
  }
  return c_start / mass;
}

// Summed in ascending key order so the result is independent of how the map
// was populated (fresh build vs. deserialized copy).
Mat sum_operators(const std::unordered_map<int, Mat>& ops, int rank) {
  std::vector<int> keys;
  keys.reserve(ops.size());
  for (const auto& [key, op] : ops) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  Mat total = Mat::Zero(rank, rank);
  for (int key : keys) total += ops.at(key);
  return total;
}

}  // namespace

namespace detail {

Vec history_coords(const SvdFactors& f, const Vec& phi_h) {
  return (f.v.transpose() * phi_h).cwiseQuotient(f.s);
}

void finalize_model(CpsrModel& model) {
  const int rank = model.svd.rank();
  model.c_inf = normalization_vector(model.svd, model.sigma_h);
  model.c_start = start_vector(model.svd, model.sigma_h, model.c_inf,
                               model.config.start_mode);
  model.c_star = sum_operators(model.c_ao, rank);
  model.zero_operator = Mat::Zero(rank, rank);
}

}  // namespace detail

void LearnerConfig::validate() const {
  if (test_spec.dim < 1 || history_spec.dim < 1) {
    throw UsageError("projection dimensions must be positive");
  }
  if (max_test_len < 1) throw UsageError("max_test_len must be at least 1");
  if (d_prime > test_spec.dim) {
    throw UsageError("retained rank d_prime exceeds the test projection dimension");
  }
  if (num_actions < 1 || num_observations < 1) {
    throw UsageError("action/observation alphabet sizes must be positive");
  }
}

int LearnerConfig::effective_rank_limit() const {
  if (d_prime > 0) return d_prime;
  return std::min(test_spec.dim, history_spec.dim + 1);
}

SufficientStats::SufficientStats(const LearnerConfig& config)
    : config_(config),
      projector_(config.test_spec, config.history_spec, config.start_mode,
                 config.cache_capacity),
      sigma_h_(Vec::Zero(config.history_spec.dim + 1)),
      sigma_th_(Mat::Zero(config.test_spec.dim, config.history_spec.dim + 1)) {
  config_.validate();
}

void SufficientStats::accumulate(const Trajectory& z, double weight) {
  z.validate();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.actions[i] < 0 || z.actions[i] >= config_.num_actions) {
      throw UsageError("action id outside the configured alphabet");
    }
    if (z.observations[i] < 0 || z.observations[i] >= config_.num_observations) {
      throw UsageError("observation id outside the configured alphabet");
    }
  }
  const std::size_t len = z.size();
  const auto m = static_cast<std::size_t>(config_.max_test_len);
  // Every prefix (the empty one included) is a history occurrence; every
  // (prefix, following block) split with block length <= m is a test
  // occurrence in that history's context.
  for (std::size_t p = 0; p <= len; ++p) {
    const Vec phi_h = projector_.history(prefix_key(z, p));
    sigma_h_ += weight * phi_h;
    const std::size_t longest = std::min(m, len - p);
    for (std::size_t t = 1; t <= longest; ++t) {
      const Vec phi_t = projector_.test(block_key(z, p, t));
      sigma_th_.noalias() += weight * phi_t * phi_h.transpose();
    }
  }
  records_.push_back(WeightedTrajectory{z, weight});
  total_weight_ += weight;
}

void SufficientStats::accumulate_corpus(const TrajectorySet& corpus) {
  for (const Trajectory& z : corpus) accumulate(z);
}

void SufficientStats::add_history_mass(const HistoryKey& h, double weight) {
  check_history_key(config_, h);
  check_weight(weight);
  sigma_h_ += weight * projector_.history(h);
  ++num_injections_;
}

void SufficientStats::add_joint_mass(const HistoryKey& h, const TestKey& tau, double weight) {
  check_history_key(config_, h);
  check_test_key(config_, tau);
  check_weight(weight);
  const Vec phi_h = projector_.history(h);
  const Vec phi_t = projector_.test(tau);
  sigma_th_.noalias() += weight * phi_t * phi_h.transpose();
  ++num_injections_;
}

void SufficientStats::add_split_mass(const HistoryKey& h, int action, int observation,
                                     const TestKey& tau, double weight) {
  check_history_key(config_, h);
  check_symbol(config_, action, observation);
  check_test_key(config_, tau);
  check_weight(weight);
  splits_.push_back(WeightedSplit{h, action, observation, tau, weight});
}

void SufficientStats::merge(const SufficientStats& other) {
  if (!specs_match(config_, other.config_)) {
    throw UsageError("cannot merge statistics accumulated under different specs");
  }
  sigma_h_ += other.sigma_h_;
  sigma_th_ += other.sigma_th_;
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
  splits_.insert(splits_.end(), other.splits_.begin(), other.splits_.end());
  total_weight_ += other.total_weight_;
  num_injections_ += other.num_injections_;
}

int CpsrModel::ao_key(int action, int observation) const {
  return action * config.num_observations + observation;
}

const Mat& CpsrModel::operator_at(int action, int observation) const {
  const auto it = c_ao.find(ao_key(action, observation));
  return it == c_ao.end() ? zero_operator : it->second;
}

CpsrModel build_model(SufficientStats& stats) {
  if (stats.empty()) throw UsageError("cannot build a model from empty statistics");
  if (!stats.sigma_th().allFinite() || !stats.sigma_h().allFinite()) {
    throw NumericalError("non-finite accumulated statistics");
  }
  const LearnerConfig& config = stats.config();
  if (config.scale_constant <= 0.0 && stats.total_weight() <= 0.0) {
    throw UsageError(
        "automatic scale needs corpus weight; set scale_constant when statistics "
        "are injected directly");
  }
  const double scale = config.scale_constant > 0.0 ? config.scale_constant
                                                   : 1.0 / stats.total_weight();

  CpsrModel model;
  model.config = config;
  model.sigma_h = stats.sigma_h();
  model.total_weight = stats.total_weight();
  model.scale = scale;
  model.svd = thin_svd(scale * stats.sigma_th(), config.effective_rank_limit(),
                       config.sv_tol);
  if (model.svd.rank() == 0) {
    throw NumericalError("rank collapse: no singular value above tolerance");
  }
  add_operator_terms(model.c_ao, stats, model.svd, scale, config.num_observations,
                     model.svd.rank());
  detail::finalize_model(model);
  return model;
}

CpsrModel incremental_update(const CpsrModel& model, SufficientStats& stats_new) {
  if (!specs_match(model.config, stats_new.config())) {
    throw UsageError("projection spec mismatch between model and new statistics");
  }
  if (stats_new.empty()) return model;
  if (!stats_new.sigma_th().allFinite() || !stats_new.sigma_h().allFinite()) {
    throw NumericalError("non-finite accumulated statistics");
  }

  // New data enters at the scale the model was built with, so old and new
  // contributions stay commensurable.
  const double scale = model.scale;
  CpsrModel updated;
  updated.config = model.config;
  updated.sigma_h = model.sigma_h + stats_new.sigma_h();
  updated.total_weight = model.total_weight + stats_new.total_weight();
  updated.scale = scale;
  updated.svd = incremental_svd_update(model.svd, scale * stats_new.sigma_th(),
                                       model.config.effective_rank_limit(),
                                       model.config.sv_tol);
  if (updated.svd.rank() == 0) {
    throw NumericalError("rank collapse: no singular value above tolerance");
  }

  // Old operators re-expressed in the updated basis: U_new^T U_old C_ao
  // S_old V_old^T V_new S_new^-1.
  const Mat left = updated.svd.u.transpose() * model.svd.u;
  const Mat right = model.svd.s.asDiagonal() *
                    (model.svd.v.transpose() * updated.svd.v) *
                    updated.svd.s.cwiseInverse().asDiagonal();
  for (const auto& [key, op] : model.c_ao) {
    updated.c_ao.emplace(key, left * op * right);
  }
  add_operator_terms(updated.c_ao, stats_new, updated.svd, scale,
                     updated.config.num_observations, updated.svd.rank());
  detail::finalize_model(updated);
  return updated;
}

PredictiveState start_state(const CpsrModel& model) {
  return PredictiveState{model.c_start, 0, true};
}

PredictiveState update_state(const CpsrModel& model, const PredictiveState& state,
                             int action, int observation) {
  if (!state.valid) {
    throw UsageError("zero-probability observation: cannot update an invalid state");
  }
  Vec next = model.operator_at(action, observation) * state.v;
  const double mass = model.c_inf.dot(next);
  if (std::abs(mass) < kStateNormFloor) {
    return PredictiveState{std::move(next), state.history_length + 1, false};
  }
  next /= mass;
  return PredictiveState{std::move(next), state.history_length + 1, true};
}

double predict_test(const CpsrModel& model, const PredictiveState& state,
                    const TestKey& test) {
  if (!state.valid) throw UsageError("cannot predict from an invalid state");
  Vec v = state.v;
  for (std::size_t i = 0; i < test.length(); ++i) {
    v = model.operator_at(test.actions[i], test.observations[i]) * v;
  }
  return model.c_inf.dot(v);
}

double predict_nstep(const CpsrModel& model, const PredictiveState& state, int action,
                     int observation, int steps) {
  if (!state.valid) throw UsageError("cannot predict from an invalid state");
  if (steps < 1) throw UsageError("n-step prediction needs at least one step");
  Vec v = state.v;
  for (int i = 1; i < steps; ++i) v = model.c_star * v;
  v = model.operator_at(action, observation) * v;
  return model.c_inf.dot(v);
}

namespace {

// Raw one-step masses c_inf . C_(a,o) v for every observation under one action.
Vec one_step_masses(const CpsrModel& model, const Vec& v, int action) {
  Vec masses(model.config.num_observations);
  for (int o = 0; o < model.config.num_observations; ++o) {
    masses(o) = model.c_inf.dot(model.operator_at(action, o) * v);
  }
  return masses;
}

}  // namespace

Vec observation_conditional(const CpsrModel& model, const PredictiveState& state,
                            int action) {
  if (action < 0 || action >= model.config.num_actions) {
    throw UsageError("action id outside the configured alphabet");
  }
  const int n = model.config.num_observations;
  if (!state.valid) return Vec::Constant(n, 1.0 / n);
  const Vec masses = one_step_masses(model, state.v, action);
  const double total = masses.sum();
  if (!(total > 0.0)) return Vec::Constant(n, 1.0 / n);
  return masses / total;
}

LikelihoodResult log_likelihood(const CpsrModel& model, const TrajectorySet& eval_set,
                                int horizon) {
  if (eval_set.empty()) throw UsageError("likelihood evaluation needs a non-empty set");
  if (horizon < 1) throw UsageError("likelihood horizon must be at least 1");
  for (const Trajectory& z : eval_set) {
    if (z.size() < static_cast<std::size_t>(horizon)) {
      throw UsageError("likelihood horizon exceeds the shortest evaluated sequence");
    }
  }
  LikelihoodResult result;
  double sum = 0.0;
  for (const Trajectory& z : eval_set) {
    PredictiveState state = start_state(model);
    for (int i = 0; i < horizon; ++i) {
      const int a = z.actions[i];
      const int o = z.observations[i];
      check_symbol(model.config, a, o);
      double p = 0.0;
      if (state.valid) {
        const Vec masses = one_step_masses(model, state.v, a);
        const double total = masses.sum();
        if (total > 0.0 && masses(o) > 0.0) p = masses(o) / total;
      }
      if (p < kLikelihoodFloor) {
        p = kLikelihoodFloor;
        ++result.floor_hits;
      }
      sum += std::log(p);
      if (i + 1 < horizon && state.valid) {
        state = update_state(model, state, a, o);
      }
    }
  }
  result.mean_log_prob = sum / static_cast<double>(eval_set.size());
  return result;
}

}  // namespace cpsr
