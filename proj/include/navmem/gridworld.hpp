#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navmem/tensor.hpp"

namespace navmem {

struct Pose {
  int row = 0;
  int col = 0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

// Index order is load-bearing: kernel layout, logits and checkpoints all use it.
enum class Action : std::uint8_t { Down = 0, Right = 1, Up = 2, Left = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {Action::Down, Action::Right,
                                                                Action::Up, Action::Left};

constexpr int action_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);

struct Displacement {
  int drow;
  int dcol;
};

constexpr Displacement displacement(Action a) {
  switch (a) {
    case Action::Down: return {1, 0};
    case Action::Right: return {0, 1};
    case Action::Up: return {-1, 0};
    case Action::Left: return {0, -1};
  }
  return {0, 0};
}

constexpr Pose apply(Pose p, Action a) {
  const auto d = displacement(a);
  return {p.row + d.drow, p.col + d.dcol};
}

std::string_view action_name(Action a);  // "down", "right", "up", "left"
Action parse_action(std::string_view name);

/// Ground-truth occupancy world. Cells outside the grid count as obstacles.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }

  bool in_bounds(Pose p) const {
    return p.row >= 0 && p.row < height_ && p.col >= 0 && p.col < width_;
  }
  bool occupied(int row, int col) const {
    return occupancy_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  /// True for obstacles and for out-of-bounds cells.
  bool blocked(Pose p) const { return !in_bounds(p) || occupied(p.row, p.col); }
  void set_occupied(int row, int col, bool value);

  Pose start() const { return start_; }
  Pose goal() const { return goal_; }
  void set_start(Pose p) { start_ = p; }
  void set_goal(Pose p) { goal_ = p; }

  const std::vector<std::uint8_t>& occupancy() const { return occupancy_; }

  /// Throws std::invalid_argument when start/goal are not distinct free cells
  /// joined by a free 4-connected path.
  void validate() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> occupancy_;
  Pose start_;
  Pose goal_;
};

enum class Orientation : std::uint8_t { OpensUp, OpensDown, OpensLeft, OpensRight };

std::string_view orientation_name(Orientation o);
Orientation parse_orientation(std::string_view name);

struct CuldesacSpec {
  int pocket_length = 20;  // interior depth
  int pocket_width = 3;    // odd
  int margin = 3;
  int approach = 5;
  Orientation orientation = Orientation::OpensUp;

  void validate() const;
  friend bool operator==(const CuldesacSpec&, const CuldesacSpec&) = default;
};

/// U-shaped pocket whose mouth faces the start; the goal sits straight behind
/// the closed end. `seed` does not change the geometry.
GridMap generate_culdesac(const CuldesacSpec& spec, std::uint64_t seed);

/// Where the pocket interior lives, in the canonical (OpensUp) frame.
struct PocketGeometry {
  CuldesacSpec spec;
  int height = 0;  // of the generated (rotated) map
  int width = 0;

  PocketGeometry() = default;
  explicit PocketGeometry(const CuldesacSpec& s);

  /// Map pose to the canonical OpensUp frame.
  Pose to_canonical(Pose p) const;
  /// Depth inside the pocket interior (0 at the mouth row), or -1 when outside.
  int depth(Pose p) const;
  /// Direction that moves away from the closed end inside the pocket.
  Action outward() const;
};

Pose step(const GridMap& map, Pose pose, Action action);

struct SensorPatch {
  int radius = 0;
  std::vector<std::uint8_t> occupancy;  // (2r+1)^2 row-major; 1 = occupied or out of bounds
  Pose center_pose;

  int side() const { return 2 * radius + 1; }
  std::uint8_t at(int di, int dj) const {
    return occupancy[static_cast<std::size_t>(di + radius) * side() + (dj + radius)];
  }
};

SensorPatch sense(const GridMap& map, Pose pose, int radius);

enum class Cell : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Raised when a patch contradicts an already-known cell.
class CorruptedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PartialMap {
 public:
  PartialMap() = default;
  PartialMap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  Cell at(int row, int col) const { return cells_[static_cast<std::size_t>(row) * width_ + col]; }
  std::size_t known_count() const;

  void stitch_in_place(const SensorPatch& patch);

  friend bool operator==(const PartialMap&, const PartialMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Cell> cells_;
};

PartialMap stitch(PartialMap partial, const SensorPatch& patch);

struct EnvState {
  GridMap map;
  Pose pose;
  PartialMap partial;
  int steps_taken = 0;
};

/// Fresh episode at map.start() with the initial footprint stitched.
EnvState reset_env(const GridMap& map, int radius);
void advance_env(EnvState& env, Action action, int radius);

/// Channel 0 occupancy, channel 1 clamped one-hot goal prior; 2x(2r+1)x(2r+1).
Tensor encode_sensor_input(const SensorPatch& patch, Pose goal);

struct PartialMapInput {
  Tensor input;  // 3xHxW: occupied, known, goal
  Pose attention;
};

PartialMapInput encode_partialmap_input(const PartialMap& partial, Pose pose, Pose goal);

/// "W H" header, then H rows of '#', '.', 'S', 'G'.
std::string write_map_text(const GridMap& map);
GridMap parse_map_text(std::string_view text);

}  // namespace navmem
