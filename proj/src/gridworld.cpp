#include "navmem/gridworld.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <sstream>

namespace navmem {

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) throw std::out_of_range("action index " + std::to_string(index));
  return static_cast<Action>(index);
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Down: return "down";
    case Action::Right: return "right";
    case Action::Up: return "up";
    case Action::Left: return "left";
  }
  return "?";
}

Action parse_action(std::string_view name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown action '" + std::string(name) + "'");
}

GridMap::GridMap(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("map dimensions must be positive");
  occupancy_.assign(static_cast<std::size_t>(height) * width, 0);
}

void GridMap::set_occupied(int row, int col, bool value) {
  if (!in_bounds({row, col})) throw std::out_of_range("cell outside map");
  occupancy_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
}

namespace {

bool reachable(const GridMap& map, Pose from, Pose to) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(map.height()) * map.width(), 0);
  std::deque<Pose> frontier{from};
  seen[static_cast<std::size_t>(from.row) * map.width() + from.col] = 1;
  while (!frontier.empty()) {
    const Pose p = frontier.front();
    frontier.pop_front();
    if (p == to) return true;
    for (Action a : kAllActions) {
      const Pose n = apply(p, a);
      if (map.blocked(n)) continue;
      auto& s = seen[static_cast<std::size_t>(n.row) * map.width() + n.col];
      if (s) continue;
      s = 1;
      frontier.push_back(n);
    }
  }
  return false;
}

}  // namespace

void GridMap::validate() const {
  if (height_ <= 0 || width_ <= 0) throw std::invalid_argument("empty map");
  if (blocked(start_)) throw std::invalid_argument("start is not a free cell");
  if (blocked(goal_)) throw std::invalid_argument("goal is not a free cell");
  if (start_ == goal_) throw std::invalid_argument("start and goal coincide");
  if (!reachable(*this, start_, goal_)) throw std::invalid_argument("goal unreachable from start");
}

std::string_view orientation_name(Orientation o) {
  switch (o) {
    case Orientation::OpensUp: return "up";
    case Orientation::OpensDown: return "down";
    case Orientation::OpensLeft: return "left";
    case Orientation::OpensRight: return "right";
  }
  return "?";
}

Orientation parse_orientation(std::string_view name) {
  for (auto o : {Orientation::OpensUp, Orientation::OpensDown, Orientation::OpensLeft, Orientation::OpensRight}) {
    if (orientation_name(o) == name) return o;
  }
  throw std::invalid_argument("unknown orientation '" + std::string(name) + "'");
}

void CuldesacSpec::validate() const {
  if (pocket_length < 1) throw std::invalid_argument("pocket_length must be >= 1");
  if (pocket_width < 1 || pocket_width % 2 == 0) throw std::invalid_argument("pocket_width must be odd and >= 1");
  if (margin < 2) throw std::invalid_argument("margin must be >= 2");
  if (approach < 1) throw std::invalid_argument("approach must be >= 1");
}

namespace {

struct CanonicalDims {
  int height;
  int width;
};

CanonicalDims canonical_dims(const CuldesacSpec& s) {
  return {s.approach + s.pocket_length + 1 + s.margin, 2 * s.margin + s.pocket_width + 2};
}

Pose from_canonical(Pose p, Orientation o, CanonicalDims c) {
  switch (o) {
    case Orientation::OpensUp: return p;
    case Orientation::OpensDown: return {c.height - 1 - p.row, c.width - 1 - p.col};
    case Orientation::OpensRight: return {p.col, c.height - 1 - p.row};
    case Orientation::OpensLeft: return {c.width - 1 - p.col, p.row};
  }
  return p;
}

}  // namespace

GridMap generate_culdesac(const CuldesacSpec& spec, std::uint64_t /*seed*/) {
  spec.validate();
  const CanonicalDims c = canonical_dims(spec);
  const bool transposed = spec.orientation == Orientation::OpensLeft || spec.orientation == Orientation::OpensRight;
  GridMap map(transposed ? c.width : c.height, transposed ? c.height : c.width);

  const int m = spec.margin;
  const int w = spec.pocket_width;
  const int d = spec.approach;
  const int closed_row = d + spec.pocket_length;
  auto wall = [&](int row, int col) {
    const Pose p = from_canonical({row, col}, spec.orientation, c);
    map.set_occupied(p.row, p.col, true);
  };
  for (int row = d; row <= closed_row; ++row) {
    wall(row, m);
    wall(row, m + w + 1);
  }
  for (int col = m; col <= m + w + 1; ++col) wall(closed_row, col);

  const int center = m + 1 + (w - 1) / 2;
  map.set_start(from_canonical({0, center}, spec.orientation, c));
  map.set_goal(from_canonical({c.height - 1, center}, spec.orientation, c));
  return map;
}

PocketGeometry::PocketGeometry(const CuldesacSpec& s) : spec(s) {
  const CanonicalDims c = canonical_dims(s);
  const bool transposed = s.orientation == Orientation::OpensLeft || s.orientation == Orientation::OpensRight;
  height = transposed ? c.width : c.height;
  width = transposed ? c.height : c.width;
}

Pose PocketGeometry::to_canonical(Pose p) const {
  const CanonicalDims c = canonical_dims(spec);
  switch (spec.orientation) {
    case Orientation::OpensUp: return p;
    case Orientation::OpensDown: return {c.height - 1 - p.row, c.width - 1 - p.col};
    case Orientation::OpensRight: return {c.height - 1 - p.col, p.row};
    case Orientation::OpensLeft: return {p.col, c.width - 1 - p.row};
  }
  return p;
}

int PocketGeometry::depth(Pose p) const {
  const Pose q = to_canonical(p);
  const int first_row = spec.approach;
  const int last_row = spec.approach + spec.pocket_length - 1;
  const int first_col = spec.margin + 1;
  const int last_col = spec.margin + spec.pocket_width;
  if (q.row < first_row || q.row > last_row || q.col < first_col || q.col > last_col) return -1;
  return q.row - first_row;
}

Action PocketGeometry::outward() const {
  switch (spec.orientation) {
    case Orientation::OpensUp: return Action::Up;
    case Orientation::OpensDown: return Action::Down;
    case Orientation::OpensLeft: return Action::Left;
    case Orientation::OpensRight: return Action::Right;
  }
  return Action::Up;
}

Pose step(const GridMap& map, Pose pose, Action action) {
  const Pose next = apply(pose, action);
  return map.blocked(next) ? pose : next;
}

SensorPatch sense(const GridMap& map, Pose pose, int radius) {
  if (radius < 1) throw std::invalid_argument("sensor radius must be >= 1");
  SensorPatch patch;
  patch.radius = radius;
  patch.center_pose = pose;
  const int side = patch.side();
  patch.occupancy.resize(static_cast<std::size_t>(side) * side);
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      patch.occupancy[static_cast<std::size_t>(i + radius) * side + (j + radius)] =
          map.blocked({pose.row + i, pose.col + j}) ? 1 : 0;
    }
  }
  return patch;
}

PartialMap::PartialMap(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("partial map dimensions must be positive");
  cells_.assign(static_cast<std::size_t>(height) * width, Cell::Unknown);
}

std::size_t PartialMap::known_count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](Cell c) { return c != Cell::Unknown; }));
}

void PartialMap::stitch_in_place(const SensorPatch& patch) {
  const Pose c = patch.center_pose;
  if (c.row < 0 || c.row >= height_ || c.col < 0 || c.col >= width_) {
    throw std::invalid_argument("patch center outside partial map");
  }
  const int r = patch.radius;
  for (int i = -r; i <= r; ++i) {
    const int row = c.row + i;
    if (row < 0 || row >= height_) continue;
    for (int j = -r; j <= r; ++j) {
      const int col = c.col + j;
      if (col < 0 || col >= width_) continue;
      const Cell seen = patch.at(i, j) ? Cell::Occupied : Cell::Free;
      Cell& cell = cells_[static_cast<std::size_t>(row) * width_ + col];
      if (cell == Cell::Unknown) {
        cell = seen;
      } else if (cell != seen) {
        throw CorruptedInput("patch contradicts known cell (" + std::to_string(row) + "," + std::to_string(col) + ")");
      }
    }
  }
}

PartialMap stitch(PartialMap partial, const SensorPatch& patch) {
  partial.stitch_in_place(patch);
  return partial;
}

EnvState reset_env(const GridMap& map, int radius) {
  EnvState env{map, map.start(), PartialMap(map.height(), map.width()), 0};
  env.partial.stitch_in_place(sense(map, env.pose, radius));
  return env;
}

void advance_env(EnvState& env, Action action, int radius) {
  env.pose = step(env.map, env.pose, action);
  ++env.steps_taken;
  env.partial.stitch_in_place(sense(env.map, env.pose, radius));
}

Tensor encode_sensor_input(const SensorPatch& patch, Pose goal) {
  const int r = patch.radius;
  const int side = patch.side();
  Tensor t({2, side, side});
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) t.at(0, y, x) = patch.occupancy[static_cast<std::size_t>(y) * side + x];
  }
  const int dy = std::clamp(goal.row - patch.center_pose.row, -r, r);
  const int dx = std::clamp(goal.col - patch.center_pose.col, -r, r);
  t.at(1, dy + r, dx + r) = 1.0;
  return t;
}

PartialMapInput encode_partialmap_input(const PartialMap& partial, Pose pose, Pose goal) {
  const int h = partial.height();
  const int w = partial.width();
  Tensor t({3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Cell c = partial.at(y, x);
      t.at(0, y, x) = c == Cell::Occupied ? 1.0 : 0.0;
      t.at(1, y, x) = c != Cell::Unknown ? 1.0 : 0.0;
    }
  }
  if (goal.row >= 0 && goal.row < h && goal.col >= 0 && goal.col < w) t.at(2, goal.row, goal.col) = 1.0;
  return {std::move(t), pose};
}

std::string write_map_text(const GridMap& map) {
  std::string out = std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(map.height()) * (map.width() + 1));
  for (int row = 0; row < map.height(); ++row) {
    for (int col = 0; col < map.width(); ++col) {
      const Pose p{row, col};
      char ch = map.occupied(row, col) ? '#' : '.';
      if (p == map.start()) ch = 'S';
      if (p == map.goal()) ch = 'G';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

namespace {

int parse_positive(std::string_view token, const char* what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value <= 0) {
    throw std::invalid_argument(std::string("map text: bad ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

GridMap parse_map_text(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw std::invalid_argument("map text: empty");
  const std::string_view header = lines[0];
  const std::size_t space = header.find(' ');
  if (space == std::string_view::npos) throw std::invalid_argument("map text: header must be 'W H'");
  const int width = parse_positive(header.substr(0, space), "width");
  const int height = parse_positive(header.substr(space + 1), "height");
  if (lines.size() < static_cast<std::size_t>(height) + 1) throw std::invalid_argument("map text: too few rows");

  GridMap map(height, width);
  int starts = 0;
  int goals = 0;
  for (int row = 0; row < height; ++row) {
    const std::string_view line = lines[static_cast<std::size_t>(row) + 1];
    if (static_cast<int>(line.size()) != width) {
      throw std::invalid_argument("map text: row " + std::to_string(row) + " has wrong length");
    }
    for (int col = 0; col < width; ++col) {
      switch (line[static_cast<std::size_t>(col)]) {
        case '#': map.set_occupied(row, col, true); break;
        case '.': break;
        case 'S': map.set_start({row, col}); ++starts; break;
        case 'G': map.set_goal({row, col}); ++goals; break;
        default: throw std::invalid_argument("map text: unexpected character");
      }
    }
  }
  for (std::size_t i = static_cast<std::size_t>(height) + 1; i < lines.size(); ++i) {
    if (!lines[i].empty()) throw std::invalid_argument("map text: trailing content");
  }
  if (starts != 1 || goals != 1) throw std::invalid_argument("map text: need exactly one S and one G");
  return map;
}

}  // namespace navmem
