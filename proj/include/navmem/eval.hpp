#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "navmem/expert.hpp"
#include "navmem/models.hpp"
#include "navmem/training.hpp"

namespace navmem {

/// Everything a policy may look at on one step. Learned policies read only
/// `encoding` (and `attention`); procedural ones may use the rest.
struct Observation {
  const Tensor* encoding = nullptr;  // per the policy's input kind
  Pose attention;                    // robot cell in the encoding's frame
  const PartialMap* partial = nullptr;
  const SensorPatch* patch = nullptr;
  Pose pose;
  Pose goal;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual InputKind input_kind() const = 0;
  /// True when the action depends on the current observation only.
  virtual bool memoryless() const = 0;
  virtual HiddenState initial_state() const { return {}; }
  virtual std::pair<Action, HiddenState> act(const Observation& obs, const HiddenState& hidden) const = 0;
};

/// The optimistic replanning expert as a closed-loop policy.
class ReplannerPolicy final : public Policy {
 public:
  InputKind input_kind() const override { return InputKind::PartialMap; }
  bool memoryless() const override { return true; }
  std::pair<Action, HiddenState> act(const Observation& obs, const HiddenState& hidden) const override;
};

/// Greedy argmax of a trained network.
class NetworkPolicy final : public Policy {
 public:
  NetworkPolicy(ModelConfig config, ModelParams params);
  InputKind input_kind() const override { return navmem::input_kind(config_.kind); }
  bool memoryless() const override { return !is_recurrent(config_.kind); }
  HiddenState initial_state() const override;
  std::pair<Action, HiddenState> act(const Observation& obs, const HiddenState& hidden) const override;
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  ModelParams params_;
};

/// Wraps a callable; `initial` seeds the hidden state for stateful callables.
class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<std::pair<Action, HiddenState>(const Observation&, const HiddenState&)>;
  FunctionPolicy(InputKind kind, bool memoryless, Fn fn, HiddenState initial = {});
  InputKind input_kind() const override { return kind_; }
  bool memoryless() const override { return memoryless_; }
  HiddenState initial_state() const override { return initial_; }
  std::pair<Action, HiddenState> act(const Observation& obs, const HiddenState& hidden) const override;

 private:
  InputKind kind_;
  bool memoryless_;
  Fn fn_;
  HiddenState initial_;
};

FunctionPolicy constant_policy(Action action);
/// Steps toward the goal, preferring the vertical axis, ignoring walls.
FunctionPolicy manhattan_policy();
/// Moves `inward` for `count` steps, then `outward` forever.
FunctionPolicy fixed_distance_policy(Action inward, Action outward, int count);

struct RolloutResult {
  bool success = false;
  int steps = 0;
  std::vector<Pose> poses;  // including the start
  std::vector<Action> actions;
  std::optional<int> deepest_depth;     // deepest pocket depth visited
  std::optional<int> turnaround_depth;  // depth at the first outward move inside the pocket
};

/// Depth inside the pocket where the first outward move happens, if any.
std::optional<int> turnaround_depth(const std::vector<Pose>& poses, const std::vector<Action>& actions,
                                    const PocketGeometry& pocket);

/// sense -> stitch -> encode -> act -> step until the goal or the budget.
/// Default budget is 10 * optimal + 100.
RolloutResult rollout(const GridMap& map, const Policy& policy, int radius, std::optional<int> budget = std::nullopt,
                      const PocketGeometry* pocket = nullptr);

struct EvalCase {
  CuldesacSpec spec;
  std::uint64_t seed = 0;
};

/// Seeded cul-de-sac instances at pocket length `length`, with the approach
/// drawn from {3..8} and the margin from {2..4} per instance.
std::vector<EvalCase> jittered_cases(int length, int count, std::uint64_t seed, CuldesacSpec base = {});
std::vector<DatasetEntry> to_entries(const std::vector<EvalCase>& cases);

struct MapResult {
  EvalCase instance;
  RolloutResult result;
};

struct EvalReport {
  std::vector<MapResult> maps;
  double success_percentage = 0.0;
  double mean_success_steps = 0.0;  // 0 when nothing succeeded
  int successes() const;
};

EvalReport evaluate(const std::vector<EvalCase>& cases, const Policy& policy, int radius,
                    std::optional<int> budget = std::nullopt);
/// Plain maps without pocket bookkeeping.
EvalReport evaluate_maps(const std::vector<GridMap>& maps, const Policy& policy, int radius);

struct SweepPoint {
  int length = 0;
  double success_fraction = 0.0;
  EvalReport report;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  int max_generalization_length = 0;
};

/// Largest tested length whose fraction is 1 with every shorter tested length
/// also at 1; 0 when the first length fails.
int prefix_perfect_length(const std::vector<std::pair<int, double>>& fractions);

struct SweepOptions {
  int seeds_per_length = 5;
  std::uint64_t seed = 1000;
  bool stop_after_failure = false;  // skip longer lengths once one fails
  std::optional<int> budget;        // per-rollout override
  CuldesacSpec base;
};

SweepReport generalization_sweep(const Policy& policy, const std::vector<int>& lengths, int radius,
                                 const SweepOptions& options = {});

struct TurnaroundHistogram {
  std::map<int, int> depth_counts;
  int no_turnaround = 0;
};

/// Histogram over rollouts of the depth of the first outward move.
TurnaroundHistogram turnaround_diagnostic(const std::vector<RolloutResult>& results,
                                          const std::vector<PocketGeometry>& pockets);

// Exports.
std::string write_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);
std::string write_sweep_csv(const SweepReport& report);
std::string write_curve_csv(const std::vector<CurvePoint>& curve);
std::string write_reward_csv(const std::vector<double>& returns);

}  // namespace navmem
