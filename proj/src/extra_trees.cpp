#include "cpsr/extra_trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "cpsr/errors.hpp"
#include "cpsr/rng.hpp"

namespace cpsr {

namespace {

constexpr int kThresholdDraws = 32;

// Grows one tree over a reusable index buffer; node sample sets are
// contiguous [begin, end) ranges of that buffer, partitioned in place.
class TreeGrower {
 public:
  TreeGrower(const Mat& x, const Vec& y, const ExtraTreesParams& params,
             std::uint64_t seed)
      : x_(x), y_(y), params_(params), gen_(seed) {
    indices_.resize(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < indices_.size(); ++i) indices_[i] = static_cast<int>(i);
  }

  Tree grow() {
    Tree tree;
    nodes_.clear();
    grow_node(0, static_cast<int>(indices_.size()));
    tree.nodes = std::move(nodes_);
    return tree;
  }

 private:
  int make_leaf(int begin, int end) {
    double sum = 0.0;
    for (int i = begin; i < end; ++i) sum += y_(indices_[static_cast<std::size_t>(i)]);
    TreeNode leaf;
    leaf.value = sum / static_cast<double>(end - begin);
    nodes_.push_back(leaf);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // A uniform draw strictly inside (lo, hi); falls back to the midpoint, and
  // reports failure when no strictly interior value is reachable.
  bool draw_threshold(double lo, double hi, double* out) {
    for (int attempt = 0; attempt < kThresholdDraws; ++attempt) {
      const double t = lo + gen_.next_double() * (hi - lo);
      if (t > lo && t < hi) {
        *out = t;
        return true;
      }
    }
    const double mid = lo + 0.5 * (hi - lo);
    if (mid > lo && mid < hi) {
      *out = mid;
      return true;
    }
    return false;
  }

  int grow_node(int begin, int end) {
    const int n = end - begin;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();
    for (int i = begin; i < end; ++i) {
      const double v = y_(indices_[static_cast<std::size_t>(i)]);
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
    if (n < params_.min_node_size || y_min == y_max) return make_leaf(begin, end);

    // Node-local feature ranges; constant features cannot be split.
    const int p = static_cast<int>(x_.cols());
    lo_.assign(static_cast<std::size_t>(p), std::numeric_limits<double>::infinity());
    hi_.assign(static_cast<std::size_t>(p), -std::numeric_limits<double>::infinity());
    for (int i = begin; i < end; ++i) {
      const int row = indices_[static_cast<std::size_t>(i)];
      for (int f = 0; f < p; ++f) {
        const double v = x_(row, f);
        lo_[static_cast<std::size_t>(f)] = std::min(lo_[static_cast<std::size_t>(f)], v);
        hi_[static_cast<std::size_t>(f)] = std::max(hi_[static_cast<std::size_t>(f)], v);
      }
    }
    eligible_.clear();
    for (int f = 0; f < p; ++f) {
      if (hi_[static_cast<std::size_t>(f)] > lo_[static_cast<std::size_t>(f)]) {
        eligible_.push_back(f);
      }
    }
    if (eligible_.empty()) return make_leaf(begin, end);

    const int tried = params_.num_candidates <= 0
                          ? static_cast<int>(eligible_.size())
                          : std::min<int>(params_.num_candidates,
                                          static_cast<int>(eligible_.size()));
    // Partial shuffle: the first `tried` entries are a uniform draw without
    // replacement.
    for (int i = 0; i < tried; ++i) {
      const int j = i + gen_.next_int(static_cast<int>(eligible_.size()) - i);
      std::swap(eligible_[static_cast<std::size_t>(i)],
                eligible_[static_cast<std::size_t>(j)]);
    }

    // Variance reduction differs from sum(left)^2/n_left + sum(right)^2/n_right
    // by a node-wide constant, so maximizing that score picks the same cut.
    double best_score = -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int c = 0; c < tried; ++c) {
      const int f = eligible_[static_cast<std::size_t>(c)];
      double threshold = 0.0;
      if (!draw_threshold(lo_[static_cast<std::size_t>(f)],
                          hi_[static_cast<std::size_t>(f)], &threshold)) {
        continue;
      }
      double left_sum = 0.0;
      double right_sum = 0.0;
      int left_n = 0;
      for (int i = begin; i < end; ++i) {
        const int row = indices_[static_cast<std::size_t>(i)];
        if (x_(row, f) <= threshold) {
          left_sum += y_(row);
          ++left_n;
        } else {
          right_sum += y_(row);
        }
      }
      const int right_n = n - left_n;
      if (left_n == 0 || right_n == 0) continue;
      const double score = left_sum * left_sum / static_cast<double>(left_n) +
                           right_sum * right_sum / static_cast<double>(right_n);
      const bool better =
          score > best_score ||
          (score == best_score &&
           (f < best_feature || (f == best_feature && threshold < best_threshold)));
      if (better) {
        best_score = score;
        best_feature = f;
        best_threshold = threshold;
      }
    }
    if (best_feature < 0) return make_leaf(begin, end);

    const auto first = indices_.begin() + begin;
    const auto last = indices_.begin() + end;
    const auto split_point = std::stable_partition(first, last, [&](int row) {
      return x_(row, best_feature) <= best_threshold;
    });
    const int mid = static_cast<int>(split_point - indices_.begin());

    const int node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const int left = grow_node(begin, mid);
    const int right = grow_node(mid, end);
    TreeNode& node = nodes_[static_cast<std::size_t>(node_index)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    return node_index;
  }

  const Mat& x_;
  const Vec& y_;
  const ExtraTreesParams& params_;
  rng::Stream gen_;
  std::vector<TreeNode> nodes_;
  std::vector<int> indices_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<int> eligible_;
};

}  // namespace

void ExtraTreesParams::validate() const {
  if (num_trees < 1) throw UsageError("ensemble needs at least one tree");
  if (num_candidates < 0) throw UsageError("candidate feature count cannot be negative");
  if (min_node_size < 1) throw UsageError("minimum node size must be positive");
}

double Tree::predict(const Vec& x) const {
  int at = 0;
  while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

double Ensemble::predict(const Vec& x) const {
  if (trees.empty()) throw UsageError("cannot predict with an empty ensemble");
  if (static_cast<int>(x.size()) != input_dim) {
    throw UsageError("prediction input dimension differs from the training data");
  }
  double sum = 0.0;
  for (const Tree& tree : trees) sum += tree.predict(x);
  return sum / static_cast<double>(trees.size());
}

Ensemble fit_extra_trees(const Mat& x, const Vec& y, const ExtraTreesParams& params,
                         std::uint64_t seed) {
  params.validate();
  if (x.rows() < 1) throw UsageError("training needs at least one sample");
  if (x.cols() < 1) throw UsageError("training needs at least one feature");
  if (y.size() != x.rows()) throw UsageError("target count differs from the sample count");
  if (!x.allFinite() || !y.allFinite()) throw UsageError("non-finite training data");

  Ensemble ensemble;
  ensemble.params = params;
  ensemble.seed = seed;
  ensemble.input_dim = static_cast<int>(x.cols());
  ensemble.trees.reserve(static_cast<std::size_t>(params.num_trees));
  for (int t = 0; t < params.num_trees; ++t) {
    TreeGrower grower(x, y, params, rng::mix(seed, static_cast<std::uint64_t>(t)));
    ensemble.trees.push_back(grower.grow());
  }
  return ensemble;
}

}  // namespace cpsr
