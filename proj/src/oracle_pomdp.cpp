#include "cpsr/oracle_pomdp.hpp"

#include <cmath>
#include <utility>

#include "cpsr/errors.hpp"

namespace cpsr {
namespace {

constexpr double kRowSumTol = 1e-12;

Mat make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

void check_stochastic(const Mat& m, const char* what) {
  for (int r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
      if (m(r, c) < 0.0) throw UsageError(std::string(what) + " has a negative entry");
      sum += m(r, c);
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      throw UsageError(std::string(what) + " row does not sum to 1");
    }
  }
}

int sample_categorical(const double* p, int n, rng::Stream& gen) {
  double u = gen.next_double();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return n - 1;  // guards against rounding in the cumulative sum
}

}  // namespace

OraclePomdp::OraclePomdp()
    : OraclePomdp(
          {make_matrix({{0.70, 0.15, 0.10, 0.05},
                        {0.10, 0.60, 0.20, 0.10},
                        {0.05, 0.25, 0.55, 0.15},
                        {0.20, 0.10, 0.10, 0.60}}),
           make_matrix({{0.10, 0.20, 0.30, 0.40},
                        {0.30, 0.40, 0.10, 0.20},
                        {0.40, 0.10, 0.30, 0.20},
                        {0.15, 0.35, 0.25, 0.25}})},
          {make_matrix({{0.90, 0.10}, {0.40, 0.60}, {0.15, 0.85}, {0.60, 0.40}}),
           make_matrix({{0.20, 0.80}, {0.70, 0.30}, {0.45, 0.55}, {0.85, 0.15}})},
          (Vec(4) << 0.40, 0.30, 0.20, 0.10).finished()) {}

OraclePomdp::OraclePomdp(std::array<Mat, 2> transition, std::array<Mat, 2> emission, Vec start)
    : transition_(std::move(transition)), emission_(std::move(emission)), start_(std::move(start)) {
  const int n = kNumStates;
  for (int a = 0; a < 2; ++a) {
    if (transition_[a].rows() != n || transition_[a].cols() != n) {
      throw UsageError("transition matrix must be states x states");
    }
    if (emission_[a].rows() != n || emission_[a].cols() != num_observations()) {
      throw UsageError("emission matrix must be states x observations");
    }
    check_stochastic(transition_[a], "transition");
    check_stochastic(emission_[a], "emission");
  }
  if (start_.size() != n) throw UsageError("start distribution must have one entry per state");
  check_stochastic(Mat(start_.transpose()), "start distribution");
}

int OraclePomdp::check_action(int action) {
  if (action < 0 || action >= 2) throw UsageError("action out of range");
  return action;
}

void OraclePomdp::reset(rng::Stream& gen) {
  state_ = sample_categorical(start_.data(), kNumStates, gen);
}

StepResult OraclePomdp::step(int action, rng::Stream& gen) {
  check_action(action);
  const Vec row = transition_[action].row(state_);
  state_ = sample_categorical(row.data(), kNumStates, gen);
  const Vec emit = emission_[action].row(state_);
  StepResult out;
  out.observation = sample_categorical(emit.data(), num_observations(), gen);
  return out;
}

Vec OraclePomdp::observation_features(int observation) const {
  if (observation < 0 || observation >= num_observations()) {
    throw UsageError("observation out of range");
  }
  Vec f = Vec::Zero(num_observations());
  f(observation) = 1.0;
  return f;
}

Vec OraclePomdp::filter_step(const Vec& weights, int action, int observation) const {
  check_action(action);
  if (observation < 0 || observation >= num_observations()) {
    throw UsageError("observation out of range");
  }
  Vec next = Vec::Zero(kNumStates);
  for (int sp = 0; sp < kNumStates; ++sp) {
    double acc = 0.0;
    for (int s = 0; s < kNumStates; ++s) acc += weights(s) * transition_[action](s, sp);
    next(sp) = acc * emission_[action](sp, observation);
  }
  return next;
}

double OraclePomdp::sequence_weight(const std::vector<int>& actions,
                                    const std::vector<int>& observations) const {
  if (actions.size() != observations.size()) {
    throw UsageError("action/observation lengths differ");
  }
  Vec w = start_;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    w = filter_step(w, actions[i], observations[i]);
  }
  return w.sum();
}

double OraclePomdp::test_probability(const HistoryKey& history, const TestKey& test) const {
  if (history.length() + test.length() > static_cast<std::size_t>(kMaxFilterLength)) {
    throw UsageError("combined history/test length exceeds the filtering cap");
  }
  Vec w = start_;
  for (std::size_t i = 0; i < history.length(); ++i) {
    w = filter_step(w, history.actions[i], history.observations[i]);
  }
  const double history_weight = w.sum();
  if (history_weight <= 0.0) throw UsageError("impossible history");
  w /= history_weight;
  for (std::size_t i = 0; i < test.length(); ++i) {
    w = filter_step(w, test.actions[i], test.observations[i]);
  }
  return w.sum();
}

}  // namespace cpsr
