#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navmem/gridworld.hpp"
#include "navmem/tensor.hpp"

namespace navmem {

/// Blocked/free grid that A* and BFS plan over. Out-of-bounds is blocked.
class PlanningGrid {
 public:
  PlanningGrid(int height, int width);

  static PlanningGrid from_map(const GridMap& map);
  /// Unknown cells count as free.
  static PlanningGrid optimistic(const PartialMap& partial);

  int height() const { return height_; }
  int width() const { return width_; }
  bool blocked(Pose p) const {
    return p.row < 0 || p.row >= height_ || p.col < 0 || p.col >= width_ ||
           blocked_[static_cast<std::size_t>(p.row) * width_ + p.col] != 0;
  }
  void set_blocked(Pose p, bool value);

 private:
  int height_;
  int width_;
  std::vector<std::uint8_t> blocked_;
};

struct Path {
  std::vector<Pose> poses;
  int length() const { return poses.empty() ? 0 : static_cast<int>(poses.size()) - 1; }
};

/// Shortest 4-connected path with Manhattan heuristic. Ties on f break on
/// fewer direction changes, then lower h, then insertion order; neighbors
/// expand in Action index order.
std::optional<Path> astar(const PlanningGrid& grid, Pose start, Pose goal);

/// Plain breadth-first move count; independent check for astar.
std::optional<int> bfs_oracle(const PlanningGrid& grid, Pose start, Pose goal);

/// First move of the A* plan on the optimistic view of `partial`.
/// Empty when known walls disconnect the goal.
std::optional<Action> replanner_policy(const PartialMap& partial, Pose pose, Pose goal);

struct TrajectoryStep {
  Pose pose;
  Tensor sensor_input;
  Tensor partialmap_input;
  Action expert_action = Action::Down;
};

struct Trajectory {
  CuldesacSpec spec;
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;
  Pose final_pose;
  bool success = false;
};

/// Closed-loop sense/stitch/plan/step run of the replanning expert.
Trajectory rollout_expert(const GridMap& map, int radius, int budget);

inline constexpr int kEncoderVersion = 1;

struct DatasetConfig {
  int budget_multiplier = 10;  // budget = multiplier * optimal + offset
  int budget_offset = 100;
};

struct Dataset {
  int radius = 3;
  int encoder_version = kEncoderVersion;
  DatasetConfig config;
  std::vector<Trajectory> trajectories;

  std::size_t total_steps() const;
};

struct DatasetEntry {
  CuldesacSpec spec;
  std::uint64_t seed = 0;
};

/// One expert rollout per entry. Throws if any rollout fails.
Dataset build_dataset(const std::vector<DatasetEntry>& entries, int radius, const DatasetConfig& config = {});
/// Every cul-de-sac shape crossed with every seed.
Dataset build_dataset(const std::vector<CuldesacSpec>& specs, const std::vector<std::uint64_t>& seeds, int radius,
                      const DatasetConfig& config = {});

/// Step budget used for a map: multiplier * optimal + offset.
int episode_budget(const GridMap& map, const DatasetConfig& config = {});

struct StepRef {
  std::uint32_t trajectory = 0;
  std::uint32_t step = 0;
  friend bool operator==(const StepRef&, const StepRef&) = default;
};

struct AliasReport {
  std::vector<std::pair<StepRef, StepRef>> pairs;
  std::uint64_t count = 0;
};

/// All pairs of steps with bit-identical sensor inputs and different expert actions.
AliasReport find_aliased_pairs(const Dataset& dataset);

/// Smallest training error any memoryless deterministic policy over sensor
/// inputs can reach on `dataset` (majority vote within identical-input groups).
double memoryless_error_lower_bound(const Dataset& dataset);

// Line-delimited JSON; tensors are re-derived on load.
std::string write_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Re-run the encoders along the recorded poses (used after loading).
void rederive_inputs(Trajectory& trajectory, int radius);

}  // namespace navmem
