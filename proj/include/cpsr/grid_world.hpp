#pragma once

#include <array>
#include <string>
#include <vector>

#include "cpsr/simulator.hpp"

namespace cpsr {

// Maze navigation with colored walls. The agent sees, for each of the four
// compass directions, the color of the nearest wall along the line of sight,
// so the observation alphabet has 3^4 = 81 symbols. Actions are N,E,S,W; a
// move succeeds with probability 0.8 and otherwise slips to one of the two
// orthogonal directions (0.1 each); moving into a wall does nothing. Reaching
// the goal pays reward 1 and teleports the agent back to the start cell, so
// episodes continue until the sampling cap: the teleport is flagged in
// StepResult::reset rather than ending the episode.
//
// Map files are rows of glyphs: digits 1-3 are walls of that color, '.' is a
// free cell, 'S' the start, 'G' the goal. The grid must be rectangular and
// fully enclosed by walls, with exactly one start and one goal and all free
// cells mutually reachable.
class ColoredGridWorld : public Simulator {
 public:
  static constexpr int kNumColors = 3;
  static constexpr double kSlipProbability = 0.2;

  static ColoredGridWorld from_map_text(const std::string& text);
  static ColoredGridWorld from_map_file(const std::string& path);
  // Built-in 47-free-cell maze used when no map file is given.
  static const char* default_map_text();

  int num_actions() const override { return 4; }  // N,E,S,W
  int num_observations() const override { return 81; }

  void reset(rng::Stream& gen) override;
  StepResult step(int action, rng::Stream& gen) override;

  // 12 bits: for each direction, a one-hot over the three wall colors.
  int observation_feature_dim() const override { return 12; }
  Vec observation_features(int observation) const override;

  // Wall colors (0..2) seen towards N,E,S,W, recovered from the symbol id.
  static std::array<int, 4> decode_observation(int observation);

  int free_cell_count() const { return free_cell_count_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  // Observation symbol at a free cell; -1 for walls.
  int observation_at(int row, int col) const { return obs_id_[row * cols_ + col]; }

 private:
  ColoredGridWorld() = default;
  void build(const std::vector<std::string>& lines);

  int rows_ = 0, cols_ = 0;
  std::vector<int> color_;   // per cell: wall color 0..2, or -1 for free
  std::vector<int> obs_id_;  // per cell: observation symbol, or -1 for walls
  int free_cell_count_ = 0;
  int start_ = 0, goal_ = 0;  // cell indices
  int pos_ = 0;
};

}  // namespace cpsr
