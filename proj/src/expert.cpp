#include "navmem/expert.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "navmem/parallel.hpp"

namespace navmem {

PlanningGrid::PlanningGrid(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("planning grid dimensions must be positive");
  blocked_.assign(static_cast<std::size_t>(height) * width, 0);
}

PlanningGrid PlanningGrid::from_map(const GridMap& map) {
  PlanningGrid grid(map.height(), map.width());
  grid.blocked_ = map.occupancy();
  return grid;
}

PlanningGrid PlanningGrid::optimistic(const PartialMap& partial) {
  PlanningGrid grid(partial.height(), partial.width());
  for (int row = 0; row < partial.height(); ++row) {
    for (int col = 0; col < partial.width(); ++col) {
      if (partial.at(row, col) == Cell::Occupied) grid.set_blocked({row, col}, true);
    }
  }
  return grid;
}

void PlanningGrid::set_blocked(Pose p, bool value) {
  if (p.row < 0 || p.row >= height_ || p.col < 0 || p.col >= width_) throw std::out_of_range("cell outside grid");
  blocked_[static_cast<std::size_t>(p.row) * width_ + p.col] = value ? 1 : 0;
}

namespace {

int manhattan(Pose a, Pose b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

struct OpenEntry {
  int f;
  int turns;
  int h;
  std::uint64_t order;
  int state;  // cell * kHeadings + arrival heading
};

struct WorseEntry {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.turns != b.turns) return a.turns > b.turns;
    if (a.h != b.h) return a.h > b.h;
    return a.order > b.order;
  }
};

// Arrival headings are the four actions plus "none" for the start cell.
constexpr int kHeadings = kNumActions + 1;
constexpr int kNoHeading = kNumActions;

void require_endpoints(const PlanningGrid& grid, Pose start, Pose goal) {
  if (grid.blocked(start)) throw std::invalid_argument("start is not free in the planning grid");
  if (grid.blocked(goal)) throw std::invalid_argument("goal is not free in the planning grid");
}

}  // namespace

std::optional<Path> astar(const PlanningGrid& grid, Pose start, Pose goal) {
  require_endpoints(grid, start, goal);
  const int width = grid.width();
  const std::size_t states = static_cast<std::size_t>(grid.height()) * width * kHeadings;
  std::vector<int> g(states, -1);
  std::vector<int> turns(states, 0);
  std::vector<int> parent(states, -1);
  std::vector<std::uint8_t> closed(states, 0);
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, WorseEntry> open;
  std::uint64_t order = 0;

  const int s0 = (start.row * width + start.col) * kHeadings + kNoHeading;
  g[s0] = 0;
  const int h0 = manhattan(start, goal);
  open.push({h0, 0, h0, order++, s0});
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    if (closed[top.state]) continue;
    closed[top.state] = 1;
    const int cell = top.state / kHeadings;
    const int heading = top.state % kHeadings;
    const Pose p{cell / width, cell % width};
    if (p == goal) {
      Path path;
      for (int s = top.state; s != -1; s = parent[s]) {
        const int c = s / kHeadings;
        path.poses.push_back({c / width, c % width});
      }
      std::reverse(path.poses.begin(), path.poses.end());
      return path;
    }
    for (Action a : kAllActions) {
      const Pose n = apply(p, a);
      if (grid.blocked(n)) continue;
      const int ns = (n.row * width + n.col) * kHeadings + action_index(a);
      if (closed[ns]) continue;
      const int cost = g[top.state] + 1;
      const int nturns = turns[top.state] + (heading != kNoHeading && heading != action_index(a) ? 1 : 0);
      if (g[ns] != -1 && (g[ns] < cost || (g[ns] == cost && turns[ns] <= nturns))) continue;
      g[ns] = cost;
      turns[ns] = nturns;
      parent[ns] = top.state;
      const int h = manhattan(n, goal);
      open.push({cost + h, nturns, h, order++, ns});
    }
  }
  return std::nullopt;
}

std::optional<int> bfs_oracle(const PlanningGrid& grid, Pose start, Pose goal) {
  require_endpoints(grid, start, goal);
  const int width = grid.width();
  std::vector<int> dist(static_cast<std::size_t>(grid.height()) * width, -1);
  std::deque<Pose> queue{start};
  dist[static_cast<std::size_t>(start.row) * width + start.col] = 0;
  while (!queue.empty()) {
    const Pose p = queue.front();
    queue.pop_front();
    const int here = dist[static_cast<std::size_t>(p.row) * width + p.col];
    if (p == goal) return here;
    for (Action a : kAllActions) {
      const Pose n = apply(p, a);
      if (grid.blocked(n)) continue;
      int& d = dist[static_cast<std::size_t>(n.row) * width + n.col];
      if (d != -1) continue;
      d = here + 1;
      queue.push_back(n);
    }
  }
  return std::nullopt;
}

std::optional<Action> replanner_policy(const PartialMap& partial, Pose pose, Pose goal) {
  if (pose == goal) throw std::invalid_argument("replanner_policy called at the goal");
  const auto path = astar(PlanningGrid::optimistic(partial), pose, goal);
  if (!path) return std::nullopt;
  const Pose next = path->poses[1];
  for (Action a : kAllActions) {
    if (apply(pose, a) == next) return a;
  }
  throw std::logic_error("A* produced a non-adjacent step");
}

Trajectory rollout_expert(const GridMap& map, int radius, int budget) {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  Trajectory traj;
  EnvState env = reset_env(map, radius);
  while (env.pose != map.goal() && env.steps_taken < budget) {
    const auto action = replanner_policy(env.partial, env.pose, map.goal());
    if (!action) break;
    TrajectoryStep s;
    s.pose = env.pose;
    s.sensor_input = encode_sensor_input(sense(map, env.pose, radius), map.goal());
    s.partialmap_input = encode_partialmap_input(env.partial, env.pose, map.goal()).input;
    s.expert_action = *action;
    traj.steps.push_back(std::move(s));
    advance_env(env, *action, radius);
  }
  traj.final_pose = env.pose;
  traj.success = env.pose == map.goal();
  return traj;
}

int episode_budget(const GridMap& map, const DatasetConfig& config) {
  const auto optimal = bfs_oracle(PlanningGrid::from_map(map), map.start(), map.goal());
  if (!optimal) throw std::invalid_argument("map goal is unreachable");
  return config.budget_multiplier * *optimal + config.budget_offset;
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

Dataset build_dataset(const std::vector<DatasetEntry>& entries, int radius, const DatasetConfig& config) {
  if (entries.empty()) throw std::invalid_argument("build_dataset: no specs given");
  Dataset dataset;
  dataset.radius = radius;
  dataset.config = config;
  dataset.trajectories.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const GridMap map = generate_culdesac(entries[i].spec, entries[i].seed);
    Trajectory t = rollout_expert(map, radius, episode_budget(map, config));
    if (!t.success) {
      throw std::runtime_error("expert failed on map " + std::to_string(i) + " (L=" +
                               std::to_string(entries[i].spec.pocket_length) + ")");
    }
    t.spec = entries[i].spec;
    t.seed = entries[i].seed;
    dataset.trajectories[i] = std::move(t);
  });
  return dataset;
}

Dataset build_dataset(const std::vector<CuldesacSpec>& specs, const std::vector<std::uint64_t>& seeds, int radius,
                      const DatasetConfig& config) {
  if (specs.empty()) throw std::invalid_argument("build_dataset: no specs given");
  std::vector<DatasetEntry> entries;
  for (const auto& spec : specs) {
    for (auto seed : seeds) entries.push_back({spec, seed});
  }
  return build_dataset(entries, radius, config);
}

namespace {

std::string tensor_key(const Tensor& t) {
  std::string key(t.size() * sizeof(double), '\0');
  std::memcpy(key.data(), t.raw(), key.size());
  return key;
}

// Steps grouped by bit-identical sensor input, groups in first-seen order.
std::vector<std::vector<StepRef>> identical_input_groups(const Dataset& dataset) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<StepRef>> groups;
  for (std::size_t t = 0; t < dataset.trajectories.size(); ++t) {
    const auto& steps = dataset.trajectories[t].steps;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      auto [it, inserted] = slot.try_emplace(tensor_key(steps[s].sensor_input), groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s)});
    }
  }
  return groups;
}

const TrajectoryStep& at(const Dataset& d, StepRef r) { return d.trajectories[r.trajectory].steps[r.step]; }

}  // namespace

AliasReport find_aliased_pairs(const Dataset& dataset) {
  AliasReport report;
  for (const auto& group : identical_input_groups(dataset)) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& a = at(dataset, group[i]);
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        const auto& b = at(dataset, group[j]);
        if (a.expert_action == b.expert_action) continue;
        report.pairs.emplace_back(group[i], group[j]);
      }
    }
  }
  report.count = report.pairs.size();
  return report;
}

double memoryless_error_lower_bound(const Dataset& dataset) {
  const std::size_t total = dataset.total_steps();
  if (total == 0) return 0.0;
  std::size_t forced = 0;
  for (const auto& group : identical_input_groups(dataset)) {
    std::size_t votes[kNumActions] = {0, 0, 0, 0};
    for (auto ref : group) ++votes[action_index(at(dataset, ref).expert_action)];
    std::size_t best = 0;
    for (auto v : votes) best = std::max(best, v);
    forced += group.size() - best;
  }
  return static_cast<double>(forced) / static_cast<double>(total);
}

void rederive_inputs(Trajectory& trajectory, int radius) {
  const GridMap map = generate_culdesac(trajectory.spec, trajectory.seed);
  PartialMap partial(map.height(), map.width());
  for (auto& s : trajectory.steps) {
    const SensorPatch patch = sense(map, s.pose, radius);
    partial.stitch_in_place(patch);
    s.sensor_input = encode_sensor_input(patch, map.goal());
    s.partialmap_input = encode_partialmap_input(partial, s.pose, map.goal()).input;
  }
}

}  // namespace navmem
