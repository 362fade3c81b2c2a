#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsr/simulator.hpp"

namespace cpsr {

enum class PocManVariant { kFull, kSparse };

// Pac-Man-style pursuit domain on a 17x19 maze with four ghosts, four power
// pills and step-penalized food collection.
//
// Dynamics per step: the agent moves (into a wall: no move), eats any food or
// pill on the landed cell, then each ghost moves. A ghost within Manhattan
// distance 5 moves deterministically toward the agent (away from it while a
// power pill is active); otherwise it moves uniformly at random, never
// reversing direction unless trapped. Sharing a cell with a ghost kills the
// agent (reward -50, episode over) unless a pill is active, in which case the
// ghost is eaten (+25) and respawns in the pen. Rewards: -1 per step, +10 per
// food piece, pills themselves pay nothing but last 15 steps. The episode
// also ends when the last food piece is eaten.
//
// The full variant scatters food over the free cells with probability 1/2 at
// episode start and observes 13 bits; the sparse variant has 7 food pieces at
// fixed map positions and drops the four food bits, observing 9 bits.
//
// Observation bit layout (bit 0 least significant; directions N,E,S,W):
//   bits 0-3   wall directly adjacent in that direction
//   bits 4-7   ghost in line of sight in that direction
//   bits 8-11  food in line of sight in that direction (full variant only)
//   top bit    power pill currently active (bit 12 full, bit 8 sparse)
//
// Map glyphs: '#' wall, '.' free, 'o' power pill, 'g' ghost spawn, 'S' agent
// start, '*' food position for the sparse variant (plain free cell otherwise).
class PocMan : public Simulator {
 public:
  static constexpr int kNumGhosts = 4;
  static constexpr int kPillDuration = 15;
  static constexpr int kChaseDistance = 5;
  static constexpr double kStepReward = -1.0;
  static constexpr double kFoodReward = 10.0;
  static constexpr double kGhostReward = 25.0;
  static constexpr double kDeathReward = -50.0;

  explicit PocMan(PocManVariant variant);
  PocMan(PocManVariant variant, const std::string& map_text);

  static const char* default_map_text();

  int num_actions() const override { return 4; }  // N,E,S,W
  int num_observations() const override { return 1 << num_bits(); }

  void reset(rng::Stream& gen) override;
  StepResult step(int action, rng::Stream& gen) override;

  int observation_feature_dim() const override { return num_bits(); }
  Vec observation_features(int observation) const override;

  PocManVariant variant() const { return variant_; }
  int num_bits() const { return variant_ == PocManVariant::kFull ? 13 : 9; }

  // State observers, mainly for tests.
  int agent_cell() const { return agent_; }
  const std::vector<int>& ghost_cells() const { return ghosts_; }
  int food_remaining() const { return food_remaining_; }
  int pill_steps_remaining() const { return pill_timer_; }

  // Test hook: overwrite the positional state mid-episode. Food, pills and
  // ghost headings are left as they are.
  void force_configuration(int agent_cell, const std::vector<int>& ghost_cells, int pill_steps);

 private:
  void parse_map(const std::string& text);
  bool free_cell(int cell) const { return free_[cell] != 0; }
  int neighbor(int cell, int dir) const;
  int manhattan(int a, int b) const;
  bool ray_hits(int from, int dir, const std::vector<int>& cells) const;
  bool ray_hits_food(int from, int dir) const;
  void move_ghost(int g, rng::Stream& gen);
  // Resolves the agent sharing a cell with ghosts. Returns the reward delta.
  double resolve_contacts(bool& dead);
  int encode_observation() const;

  PocManVariant variant_;
  int rows_ = 0, cols_ = 0;
  std::vector<std::uint8_t> free_;
  int start_ = 0;
  std::vector<int> spawns_;      // ghost pen cells
  std::vector<int> pill_cells_;  // power pill positions
  std::vector<int> sparse_food_;

  // Episode state.
  int agent_ = 0;
  std::vector<int> ghosts_;
  std::vector<int> ghost_dir_;  // last move direction, -1 if none
  std::vector<std::uint8_t> food_;
  std::vector<std::uint8_t> pill_present_;  // parallel to pill_cells_
  int food_remaining_ = 0;
  int pill_timer_ = 0;
  bool done_ = false;
};

}  // namespace cpsr
