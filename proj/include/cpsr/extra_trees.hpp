#pragma once

#include <cstdint>
#include <vector>

#include "cpsr/linalg.hpp"

namespace cpsr {

// One node of a regression tree, linked by index into the owning tree's node
// vector. Leaves carry the mean of their training targets; split nodes route
// x(feature) <= threshold to the left child. Thresholds are strictly inside
// the node-local range of the feature, so both children always receive at
// least one training sample.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf prediction

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // index 0 is the root

  double predict(const Vec& x) const;
};

struct ExtraTreesParams {
  int num_trees = 25;
  int num_candidates = 0;  // features tried per node; 0 means all of them
  int min_node_size = 5;   // nodes smaller than this become leaves

  void validate() const;
};

// Ensemble of extremely randomized regression trees: every tree is grown on
// the full sample with randomized split choices, and the prediction is the
// mean of the per-tree predictions.
struct Ensemble {
  ExtraTreesParams params;
  std::uint64_t seed = 0;
  int input_dim = 0;
  std::vector<Tree> trees;

  double predict(const Vec& x) const;
};

// Grows params.num_trees trees over rows of x with targets y. At each node a
// random subset of the non-constant features is tried, each with one uniform
// random cut inside its node-local range, and the cut with the largest
// variance reduction wins (ties: lowest feature index, then lowest
// threshold). Nodes stop splitting when they are smaller than min_node_size,
// their targets are constant, or every feature is constant. Tree t draws all
// of its randomness from a stream seeded with mix(seed, t), so the fit is a
// pure function of (x, y, params, seed).
Ensemble fit_extra_trees(const Mat& x, const Vec& y, const ExtraTreesParams& params,
                         std::uint64_t seed);

}  // namespace cpsr
