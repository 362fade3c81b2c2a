#include "cpsr/pocman.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "cpsr/errors.hpp"

namespace cpsr {
namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

}  // namespace

const char* PocMan::default_map_text() {
  return
      "#################\n"
      "#*......#......*#\n"
      "#o##.##.#.##.##o#\n"
      "#...............#\n"
      "#.##.###.###.##.#\n"
      "#....#.....#....#\n"
      "#.##.#.###.#.##.#\n"
      "#*#..#.....#..#*#\n"
      "#.##..##.##..##.#\n"
      "#.##..#ggg#..##.#\n"
      "#.##..#.g.#..##.#\n"
      "#.##..#####..##.#\n"
      "#.......S.......#\n"
      "#.##.##.#.##.##.#\n"
      "#o.#.........#.o#\n"
      "###.#.##.##.#.###\n"
      "#...#...#...#...#\n"
      "#*......*......*#\n"
      "#################\n";
}

PocMan::PocMan(PocManVariant variant) : PocMan(variant, default_map_text()) {}

PocMan::PocMan(PocManVariant variant, const std::string& map_text) : variant_(variant) {
  parse_map(map_text);
}

void PocMan::parse_map(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 3) throw UsageError("malformed map: needs at least 3 rows");
  rows_ = static_cast<int>(lines.size());
  cols_ = static_cast<int>(lines[0].size());
  int starts = 0;
  free_.assign(static_cast<std::size_t>(rows_) * cols_, 0);
  for (int r = 0; r < rows_; ++r) {
    if (static_cast<int>(lines[r].size()) != cols_) {
      throw UsageError("malformed map: row " + std::to_string(r) + " has a different length");
    }
    for (int c = 0; c < cols_; ++c) {
      const char g = lines[r][c];
      const int cell = r * cols_ + c;
      const bool border = r == 0 || c == 0 || r == rows_ - 1 || c == cols_ - 1;
      if (g == '#') continue;
      if (border) {
        throw UsageError("malformed map: border cell at row " + std::to_string(r) +
                         " col " + std::to_string(c) + " is not a wall");
      }
      free_[cell] = 1;
      switch (g) {
        case '.': break;
        case 'o': pill_cells_.push_back(cell); break;
        case 'g': spawns_.push_back(cell); break;
        case '*': sparse_food_.push_back(cell); break;
        case 'S': start_ = cell; ++starts; break;
        default:
          throw UsageError(std::string("malformed map: invalid glyph '") + g + "' at row " +
                           std::to_string(r) + " col " + std::to_string(c));
      }
    }
  }
  if (starts != 1) {
    throw UsageError("malformed map: expected exactly one start cell, found " +
                     std::to_string(starts));
  }
  if (static_cast<int>(spawns_.size()) != kNumGhosts) {
    throw UsageError("malformed map: expected " + std::to_string(kNumGhosts) +
                     " ghost spawn cells, found " + std::to_string(spawns_.size()));
  }
  if (variant_ == PocManVariant::kSparse && sparse_food_.empty()) {
    throw UsageError("malformed map: sparse variant needs food positions");
  }
}

void PocMan::reset(rng::Stream& gen) {
  agent_ = start_;
  ghosts_ = spawns_;
  ghost_dir_.assign(kNumGhosts, -1);
  pill_present_.assign(pill_cells_.size(), 1);
  pill_timer_ = 0;
  done_ = false;

  food_.assign(free_.size(), 0);
  food_remaining_ = 0;
  if (variant_ == PocManVariant::kSparse) {
    for (int cell : sparse_food_) food_[cell] = 1;
    food_remaining_ = static_cast<int>(sparse_food_.size());
  } else {
    // Food lands on each plain free cell with probability 1/2; pill cells,
    // the pen and the start stay clear.
    std::vector<std::uint8_t> excluded(free_.size(), 0);
    for (int cell : pill_cells_) excluded[cell] = 1;
    for (int cell : spawns_) excluded[cell] = 1;
    excluded[start_] = 1;
    for (std::size_t cell = 0; cell < free_.size(); ++cell) {
      if (free_[cell] && !excluded[cell] && gen.next_bool()) {
        food_[cell] = 1;
        ++food_remaining_;
      }
    }
  }
}

int PocMan::neighbor(int cell, int dir) const {
  return (cell / cols_ + kDr[dir]) * cols_ + (cell % cols_ + kDc[dir]);
}

int PocMan::manhattan(int a, int b) const {
  return std::abs(a / cols_ - b / cols_) + std::abs(a % cols_ - b % cols_);
}

double PocMan::resolve_contacts(bool& dead) {
  double reward = 0.0;
  for (int g = 0; g < kNumGhosts; ++g) {
    if (ghosts_[g] != agent_) continue;
    if (pill_timer_ > 0) {
      reward += kGhostReward;
      ghosts_[g] = spawns_[g];
      ghost_dir_[g] = -1;
    } else {
      reward += kDeathReward;
      dead = true;
    }
  }
  return reward;
}

void PocMan::move_ghost(int g, rng::Stream& gen) {
  int options[4];
  int n = 0;
  for (int d = 0; d < 4; ++d) {
    if (free_cell(neighbor(ghosts_[g], d))) options[n++] = d;
  }
  if (n == 0) return;
  // Never turn straight back unless the dead end forces it.
  if (ghost_dir_[g] >= 0 && n > 1) {
    const int reverse = (ghost_dir_[g] + 2) % 4;
    for (int i = 0; i < n; ++i) {
      if (options[i] == reverse) {
        options[i] = options[--n];
        std::sort(options, options + n);
        break;
      }
    }
  }
  int choice;
  if (manhattan(ghosts_[g], agent_) <= kChaseDistance) {
    // Pursuit: pick the move that most reduces (or, fleeing, increases) the
    // distance to the agent; ties break toward the lowest direction index.
    const bool flee = pill_timer_ > 0;
    choice = options[0];
    int best = manhattan(neighbor(ghosts_[g], choice), agent_);
    for (int i = 1; i < n; ++i) {
      const int dist = manhattan(neighbor(ghosts_[g], options[i]), agent_);
      if (flee ? dist > best : dist < best) {
        best = dist;
        choice = options[i];
      }
    }
  } else {
    choice = options[gen.next_int(n)];
  }
  ghosts_[g] = neighbor(ghosts_[g], choice);
  ghost_dir_[g] = choice;
}

StepResult PocMan::step(int action, rng::Stream& gen) {
  if (action < 0 || action >= num_actions()) throw UsageError("action out of range");
  if (done_) throw UsageError("episode is over; reset the simulator");

  if (pill_timer_ > 0) --pill_timer_;
  StepResult out;
  out.reward = kStepReward;

  const int target = neighbor(agent_, action);
  if (free_cell(target)) agent_ = target;
  if (food_[agent_]) {
    food_[agent_] = 0;
    --food_remaining_;
    out.reward += kFoodReward;
  }
  for (std::size_t i = 0; i < pill_cells_.size(); ++i) {
    if (pill_present_[i] && pill_cells_[i] == agent_) {
      pill_present_[i] = 0;
      pill_timer_ = kPillDuration;
    }
  }

  bool dead = false;
  out.reward += resolve_contacts(dead);
  if (!dead) {
    for (int g = 0; g < kNumGhosts; ++g) move_ghost(g, gen);
    out.reward += resolve_contacts(dead);
  }

  done_ = dead || food_remaining_ == 0;
  out.done = done_;
  out.observation = encode_observation();
  return out;
}

bool PocMan::ray_hits(int from, int dir, const std::vector<int>& cells) const {
  for (int cell = neighbor(from, dir); free_cell(cell); cell = neighbor(cell, dir)) {
    if (std::find(cells.begin(), cells.end(), cell) != cells.end()) return true;
  }
  return false;
}

bool PocMan::ray_hits_food(int from, int dir) const {
  for (int cell = neighbor(from, dir); free_cell(cell); cell = neighbor(cell, dir)) {
    if (food_[cell]) return true;
  }
  return false;
}

int PocMan::encode_observation() const {
  int id = 0;
  for (int d = 0; d < 4; ++d) {
    if (!free_cell(neighbor(agent_, d))) id |= 1 << d;
  }
  for (int d = 0; d < 4; ++d) {
    if (ray_hits(agent_, d, ghosts_)) id |= 1 << (4 + d);
  }
  if (variant_ == PocManVariant::kFull) {
    for (int d = 0; d < 4; ++d) {
      if (ray_hits_food(agent_, d)) id |= 1 << (8 + d);
    }
  }
  if (pill_timer_ > 0) id |= 1 << (num_bits() - 1);
  return id;
}

Vec PocMan::observation_features(int observation) const {
  if (observation < 0 || observation >= num_observations()) {
    throw UsageError("observation out of range");
  }
  Vec f = Vec::Zero(num_bits());
  for (int b = 0; b < num_bits(); ++b) f(b) = (observation >> b) & 1;
  return f;
}

void PocMan::force_configuration(int agent_cell, const std::vector<int>& ghost_cells,
                                 int pill_steps) {
  if (!free_cell(agent_cell)) throw UsageError("agent cell is a wall");
  if (static_cast<int>(ghost_cells.size()) != kNumGhosts) {
    throw UsageError("need one cell per ghost");
  }
  for (int cell : ghost_cells) {
    if (!free_cell(cell)) throw UsageError("ghost cell is a wall");
  }
  agent_ = agent_cell;
  ghosts_ = ghost_cells;
  pill_timer_ = pill_steps;
  done_ = false;
}

}  // namespace cpsr
