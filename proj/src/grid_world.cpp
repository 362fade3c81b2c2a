#include "cpsr/grid_world.hpp"

#include <deque>
#include <fstream>
#include <sstream>

#include "cpsr/errors.hpp"

namespace cpsr {
namespace {

// Row/column deltas for N,E,S,W.
constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

const char* ColoredGridWorld::default_map_text() {
  return
      "1321321321321\n"
      "2...1...3...2\n"
      "3.1321.2112.3\n"
      "1..S........1\n"
      "213.13213.132\n"
      "3.1...3..G..3\n"
      "1.213.13233.1\n"
      "2.....2.....2\n"
      "3213213213213\n";
}

ColoredGridWorld ColoredGridWorld::from_map_text(const std::string& text) {
  ColoredGridWorld world;
  world.build(split_lines(text));
  return world;
}

ColoredGridWorld ColoredGridWorld::from_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open map file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_map_text(buffer.str());
}

void ColoredGridWorld::build(const std::vector<std::string>& lines) {
  std::vector<std::string> violations;
  if (lines.size() < 3) violations.push_back("map needs at least 3 rows");
  rows_ = static_cast<int>(lines.size());
  cols_ = lines.empty() ? 0 : static_cast<int>(lines[0].size());
  for (int r = 0; r < rows_; ++r) {
    if (static_cast<int>(lines[r].size()) != cols_) {
      violations.push_back("row " + std::to_string(r) + " has a different length");
    }
  }
  if (!violations.empty()) {
    throw UsageError("malformed map: " + violations[0]);
  }

  color_.assign(static_cast<std::size_t>(rows_) * cols_, -1);
  int starts = 0, goals = 0;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const char g = lines[r][c];
      const int cell = r * cols_ + c;
      if (g >= '1' && g <= '0' + kNumColors) {
        color_[cell] = g - '1';
      } else if (g == '.') {
        // free
      } else if (g == 'S') {
        start_ = cell;
        ++starts;
      } else if (g == 'G') {
        goal_ = cell;
        ++goals;
      } else {
        violations.push_back(std::string("invalid glyph '") + g + "' at row " +
                             std::to_string(r) + " col " + std::to_string(c));
      }
    }
  }
  if (starts != 1) violations.push_back("expected exactly one start cell, found " + std::to_string(starts));
  if (goals != 1) violations.push_back("expected exactly one goal cell, found " + std::to_string(goals));

  auto is_wall = [&](int r, int c) { return color_[r * cols_ + c] >= 0; };
  for (int r = 0; r < rows_ && violations.empty(); ++r) {
    for (int c = 0; c < cols_; ++c) {
      const bool border = r == 0 || c == 0 || r == rows_ - 1 || c == cols_ - 1;
      if (border && !is_wall(r, c)) {
        violations.push_back("border cell at row " + std::to_string(r) + " col " +
                             std::to_string(c) + " is not a wall");
      }
    }
  }

  free_cell_count_ = 0;
  for (int cell = 0; cell < rows_ * cols_; ++cell) {
    if (color_[cell] < 0) ++free_cell_count_;
  }
  if (violations.empty()) {
    // Flood fill from the start; every free cell must be reachable.
    std::vector<char> seen(color_.size(), 0);
    std::deque<int> queue = {start_};
    seen[start_] = 1;
    int reached = 0;
    while (!queue.empty()) {
      const int cell = queue.front();
      queue.pop_front();
      ++reached;
      const int r = cell / cols_, c = cell % cols_;
      for (int d = 0; d < 4; ++d) {
        const int n = (r + kDr[d]) * cols_ + (c + kDc[d]);
        if (!seen[n] && color_[n] < 0) {
          seen[n] = 1;
          queue.push_back(n);
        }
      }
    }
    if (reached != free_cell_count_) {
      violations.push_back(std::to_string(free_cell_count_ - reached) +
                           " free cells unreachable from the start");
    }
  }
  if (!violations.empty()) {
    std::string message = "malformed map: " + violations[0];
    for (std::size_t i = 1; i < violations.size(); ++i) message += "; " + violations[i];
    throw UsageError(message);
  }

  // Precompute the line-of-sight symbol for every free cell. Enclosure
  // guarantees every ray terminates at a colored wall.
  obs_id_.assign(color_.size(), -1);
  for (int r = 1; r < rows_ - 1; ++r) {
    for (int c = 1; c < cols_ - 1; ++c) {
      if (color_[r * cols_ + c] >= 0) continue;
      int id = 0;
      for (int d = 0; d < 4; ++d) {
        int rr = r, cc = c;
        while (color_[(rr + kDr[d]) * cols_ + (cc + kDc[d])] < 0) {
          rr += kDr[d];
          cc += kDc[d];
        }
        id = id * kNumColors + color_[(rr + kDr[d]) * cols_ + (cc + kDc[d])];
      }
      obs_id_[r * cols_ + c] = id;
    }
  }
  pos_ = start_;
}

void ColoredGridWorld::reset(rng::Stream&) { pos_ = start_; }

StepResult ColoredGridWorld::step(int action, rng::Stream& gen) {
  if (action < 0 || action >= num_actions()) throw UsageError("action out of range");
  const double u = gen.next_double();
  int dir = action;
  if (u >= 1.0 - kSlipProbability) {
    dir = u < 1.0 - kSlipProbability / 2 ? (action + 1) % 4 : (action + 3) % 4;
  }
  const int r = pos_ / cols_ + kDr[dir];
  const int c = pos_ % cols_ + kDc[dir];
  if (color_[r * cols_ + c] < 0) pos_ = r * cols_ + c;

  StepResult out;
  if (pos_ == goal_) {
    out.reward = 1.0;
    out.reset = true;
    pos_ = start_;
  }
  out.observation = obs_id_[pos_];
  return out;
}

std::array<int, 4> ColoredGridWorld::decode_observation(int observation) {
  if (observation < 0 || observation >= 81) throw UsageError("observation out of range");
  std::array<int, 4> colors{};
  for (int d = 3; d >= 0; --d) {
    colors[d] = observation % kNumColors;
    observation /= kNumColors;
  }
  return colors;
}

Vec ColoredGridWorld::observation_features(int observation) const {
  const auto colors = decode_observation(observation);
  Vec f = Vec::Zero(observation_feature_dim());
  for (int d = 0; d < 4; ++d) f(d * kNumColors + colors[d]) = 1.0;
  return f;
}

}  // namespace cpsr
