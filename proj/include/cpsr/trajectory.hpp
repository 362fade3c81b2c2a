#pragma once

#include <cstdint>
#include <vector>

#include "cpsr/errors.hpp"

namespace cpsr {

// One episode of interaction. Parallel arrays; rewards may be absent when a
// corpus was generated for model learning only. resets marks steps on which
// the environment teleported back to its start configuration mid-episode
// (continuing tasks); terminated marks a hard end-of-episode on the last step.
struct Trajectory {
  std::vector<int> actions;
  std::vector<int> observations;
  std::vector<double> rewards;
  std::vector<std::uint8_t> resets;
  bool terminated = false;

  std::size_t size() const { return actions.size(); }
  bool has_rewards() const { return !rewards.empty(); }

  void validate() const {
    if (observations.size() != actions.size()) {
      throw UsageError("trajectory action/observation lengths differ");
    }
    if (!rewards.empty() && rewards.size() != actions.size()) {
      throw UsageError("trajectory reward length differs");
    }
    if (!resets.empty() && resets.size() != actions.size()) {
      throw UsageError("trajectory reset-flag length differs");
    }
  }

  bool reset_at(std::size_t t) const { return !resets.empty() && resets[t] != 0; }
};

using TrajectorySet = std::vector<Trajectory>;

}  // namespace cpsr
