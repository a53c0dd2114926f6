#include "navmem/eval.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

#include "navmem/json_io.hpp"
#include "navmem/parallel.hpp"

namespace navmem {

using nlohmann::json;

std::pair<Action, HiddenState> ReplannerPolicy::act(const Observation& obs, const HiddenState& hidden) const {
  if (obs.partial == nullptr) throw std::invalid_argument("replanner needs the partial map");
  const std::optional<Action> a = replanner_policy(*obs.partial, obs.pose, obs.goal);
  if (!a) throw std::runtime_error("replanner: goal unreachable on the known map");
  return {*a, hidden};
}

NetworkPolicy::NetworkPolicy(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  for (const auto& [name, shape] : layout) {
    const auto it = params_.find(name);
    if (it == params_.end() || it->second.shape() != shape) {
      throw std::invalid_argument("parameters do not match model kind " + std::string(model_kind_name(config_.kind)));
    }
  }
}

HiddenState NetworkPolicy::initial_state() const {
  return is_recurrent(config_.kind) ? zero_hidden(config_) : HiddenState{};
}

std::pair<Action, HiddenState> NetworkPolicy::act(const Observation& obs, const HiddenState& hidden) const {
  if (obs.encoding == nullptr) throw std::invalid_argument("network policy needs an encoded input");
  if (obs.encoding->rank() != 3 || obs.encoding->dim(0) != config_.input_channels()) {
    throw std::invalid_argument("policy/input kind mismatch: got " + shape_string(obs.encoding->shape()));
  }
  ad::Tape tape(false);
  const BoundParams bound(tape, params_);
  if (is_recurrent(config_.kind)) {
    ad::LstmState state = hidden_vars(tape, hidden.empty() ? zero_hidden(config_) : hidden);
    const StepVars out = forward_step(tape, bound, config_, *obs.encoding, obs.attention, &state);
    return {greedy_action(out.logits.value()), hidden_values(state)};
  }
  const StepVars out = forward_step(tape, bound, config_, *obs.encoding, obs.attention, nullptr);
  return {greedy_action(out.logits.value()), hidden};
}

FunctionPolicy::FunctionPolicy(InputKind kind, bool memoryless, Fn fn, HiddenState initial)
    : kind_(kind), memoryless_(memoryless), fn_(std::move(fn)), initial_(std::move(initial)) {}

std::pair<Action, HiddenState> FunctionPolicy::act(const Observation& obs, const HiddenState& hidden) const {
  return fn_(obs, hidden);
}

FunctionPolicy constant_policy(Action action) {
  return FunctionPolicy(InputKind::Sensor, true,
                        [action](const Observation&, const HiddenState& h) { return std::pair{action, h}; });
}

FunctionPolicy manhattan_policy() {
  return FunctionPolicy(InputKind::Sensor, true, [](const Observation& obs, const HiddenState& h) {
    Action a = Action::Down;
    if (obs.goal.row > obs.pose.row) {
      a = Action::Down;
    } else if (obs.goal.row < obs.pose.row) {
      a = Action::Up;
    } else if (obs.goal.col > obs.pose.col) {
      a = Action::Right;
    } else {
      a = Action::Left;
    }
    return std::pair{a, h};
  });
}

FunctionPolicy fixed_distance_policy(Action inward, Action outward, int count) {
  HiddenState initial{Tensor({1}, 0.0), Tensor({1}, 0.0)};
  return FunctionPolicy(
      InputKind::Sensor, false,
      [inward, outward, count](const Observation&, const HiddenState& h) {
        HiddenState next = h;
        next.h[0] += 1.0;
        return std::pair{h.h[0] < count ? inward : outward, next};
      },
      initial);
}

std::optional<int> turnaround_depth(const std::vector<Pose>& poses, const std::vector<Action>& actions,
                                    const PocketGeometry& pocket) {
  const Action out = pocket.outward();
  for (std::size_t i = 0; i < actions.size() && i < poses.size(); ++i) {
    const int depth = pocket.depth(poses[i]);
    if (depth >= 0 && actions[i] == out) return depth;
  }
  return std::nullopt;
}

RolloutResult rollout(const GridMap& map, const Policy& policy, int radius, std::optional<int> budget,
                      const PocketGeometry* pocket) {
  const int limit = budget ? *budget : episode_budget(map);
  if (limit < 1) throw std::invalid_argument("rollout budget must be positive");
  EnvState env = reset_env(map, radius);
  HiddenState hidden = policy.initial_state();
  RolloutResult result;
  result.poses.push_back(env.pose);
  const Pose goal = map.goal();
  while (env.pose != goal && env.steps_taken < limit) {
    const SensorPatch patch = sense(map, env.pose, radius);
    Tensor encoding;
    Pose attention;
    if (policy.input_kind() == InputKind::Sensor) {
      encoding = encode_sensor_input(patch, goal);
      attention = {radius, radius};
    } else {
      PartialMapInput in = encode_partialmap_input(env.partial, env.pose, goal);
      encoding = std::move(in.input);
      attention = in.attention;
    }
    const Observation obs{&encoding, attention, &env.partial, &patch, env.pose, goal};
    auto [action, next_hidden] = policy.act(obs, hidden);
    hidden = std::move(next_hidden);
    advance_env(env, action, radius);
    result.actions.push_back(action);
    result.poses.push_back(env.pose);
  }
  result.steps = env.steps_taken;
  result.success = env.pose == goal;
  if (pocket != nullptr) {
    for (const Pose& p : result.poses) {
      const int d = pocket->depth(p);
      if (d >= 0 && (!result.deepest_depth || d > *result.deepest_depth)) result.deepest_depth = d;
    }
    result.turnaround_depth = turnaround_depth(result.poses, result.actions, *pocket);
  }
  return result;
}

std::vector<EvalCase> jittered_cases(int length, int count, std::uint64_t seed, CuldesacSpec base) {
  if (count < 0) throw std::invalid_argument("case count must be non-negative");
  std::mt19937_64 rng(seed);
  std::vector<EvalCase> cases;
  cases.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    CuldesacSpec spec = base;
    spec.pocket_length = length;
    spec.approach = 3 + static_cast<int>(rng() % 6);
    spec.margin = 2 + static_cast<int>(rng() % 3);
    spec.validate();
    cases.push_back({spec, seed + static_cast<std::uint64_t>(i)});
  }
  return cases;
}

std::vector<DatasetEntry> to_entries(const std::vector<EvalCase>& cases) {
  std::vector<DatasetEntry> entries;
  entries.reserve(cases.size());
  for (const EvalCase& c : cases) entries.push_back({c.spec, c.seed});
  return entries;
}

int EvalReport::successes() const {
  return static_cast<int>(std::count_if(maps.begin(), maps.end(), [](const MapResult& m) { return m.result.success; }));
}

namespace {

void summarize(EvalReport& report) {
  if (report.maps.empty()) return;
  const int ok = report.successes();
  report.success_percentage = 100.0 * ok / static_cast<double>(report.maps.size());
  double steps = 0.0;
  for (const MapResult& m : report.maps) {
    if (m.result.success) steps += m.result.steps;
  }
  report.mean_success_steps = ok > 0 ? steps / ok : 0.0;
}

}  // namespace

EvalReport evaluate(const std::vector<EvalCase>& cases, const Policy& policy, int radius, std::optional<int> budget) {
  if (cases.empty()) throw std::invalid_argument("evaluate: no maps");
  EvalReport report;
  report.maps.resize(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const GridMap map = generate_culdesac(cases[i].spec, cases[i].seed);
    const PocketGeometry pocket(cases[i].spec);
    report.maps[i] = {cases[i], rollout(map, policy, radius, budget, &pocket)};
  });
  summarize(report);
  return report;
}

EvalReport evaluate_maps(const std::vector<GridMap>& maps, const Policy& policy, int radius) {
  if (maps.empty()) throw std::invalid_argument("evaluate: no maps");
  EvalReport report;
  report.maps.resize(maps.size());
  parallel_for(maps.size(), [&](std::size_t i) { report.maps[i].result = rollout(maps[i], policy, radius); });
  summarize(report);
  return report;
}

int prefix_perfect_length(const std::vector<std::pair<int, double>>& fractions) {
  int best = 0;
  for (const auto& [length, fraction] : fractions) {
    if (fraction < 1.0) break;
    best = length;
  }
  return best;
}

SweepReport generalization_sweep(const Policy& policy, const std::vector<int>& lengths, int radius,
                                 const SweepOptions& options) {
  if (lengths.empty()) throw std::invalid_argument("sweep: no lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw std::invalid_argument("sweep: lengths must be positive");
    if (i > 0 && lengths[i] <= lengths[i - 1]) throw std::invalid_argument("sweep: lengths must strictly increase");
  }
  if (options.seeds_per_length < 1) throw std::invalid_argument("sweep: seeds per length must be positive");
  SweepReport report;
  std::vector<std::pair<int, double>> fractions;
  for (int length : lengths) {
    SweepPoint point;
    point.length = length;
    point.report = evaluate(jittered_cases(length, options.seeds_per_length, options.seed, options.base), policy, radius,
                            options.budget);
    point.success_fraction = point.report.successes() / static_cast<double>(point.report.maps.size());
    fractions.emplace_back(length, point.success_fraction);
    const bool failed = point.success_fraction < 1.0;
    report.points.push_back(std::move(point));
    if (failed && options.stop_after_failure) break;
  }
  report.max_generalization_length = prefix_perfect_length(fractions);
  return report;
}

TurnaroundHistogram turnaround_diagnostic(const std::vector<RolloutResult>& results,
                                          const std::vector<PocketGeometry>& pockets) {
  if (results.size() != pockets.size()) throw std::invalid_argument("turnaround: one pocket per rollout");
  TurnaroundHistogram hist;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (pockets[i].spec.orientation != pockets.front().spec.orientation) {
      throw std::invalid_argument("turnaround: pockets must share an orientation");
    }
    const auto depth = turnaround_depth(results[i].poses, results[i].actions, pockets[i]);
    if (depth) {
      ++hist.depth_counts[*depth];
    } else {
      ++hist.no_turnaround;
    }
  }
  return hist;
}

namespace {

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::optional<int> read_optional_int(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<int>(j.get<int>());
}

}  // namespace

std::string write_report(const EvalReport& report) {
  json rows = json::array();
  for (const MapResult& m : report.maps) {
    rows.push_back(json{{"length", m.instance.spec.pocket_length},
                        {"seed", m.instance.seed},
                        {"spec", m.instance.spec},
                        {"success", m.result.success},
                        {"steps", m.result.steps},
                        {"deepest_depth", optional_int(m.result.deepest_depth)},
                        {"turnaround_depth", optional_int(m.result.turnaround_depth)}});
  }
  const json doc{{"maps", rows},
                 {"summary",
                  {{"total", report.maps.size()},
                   {"successes", report.successes()},
                   {"success_percentage", report.success_percentage},
                   {"mean_success_steps", report.mean_success_steps}}}};
  return doc.dump(2) + "\n";
}

EvalReport parse_report(const std::string& text) {
  const json doc = json::parse(text);
  EvalReport report;
  for (const json& row : doc.at("maps")) {
    MapResult m;
    m.instance.spec = row.at("spec").get<CuldesacSpec>();
    m.instance.seed = row.at("seed").get<std::uint64_t>();
    m.result.success = row.at("success").get<bool>();
    m.result.steps = row.at("steps").get<int>();
    m.result.deepest_depth = read_optional_int(row.at("deepest_depth"));
    m.result.turnaround_depth = read_optional_int(row.at("turnaround_depth"));
    report.maps.push_back(std::move(m));
  }
  const json& summary = doc.at("summary");
  report.success_percentage = summary.at("success_percentage").get<double>();
  report.mean_success_steps = summary.at("mean_success_steps").get<double>();
  if (summary.at("total").get<std::size_t>() != report.maps.size() ||
      summary.at("successes").get<int>() != report.successes()) {
    throw std::invalid_argument("report summary disagrees with its rows");
  }
  return report;
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string write_sweep_csv(const SweepReport& report) {
  std::string out = "length,success_fraction\n";
  for (const SweepPoint& p : report.points) out += std::to_string(p.length) + "," + format_double(p.success_fraction) + "\n";
  return out;
}

std::string write_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "epoch,train_error,test_error\n";
  for (const CurvePoint& p : curve) {
    out += std::to_string(p.epoch) + "," + format_double(p.train_error) + "," + format_double(p.test_error) + "\n";
  }
  return out;
}

std::string write_reward_csv(const std::vector<double>& returns) {
  std::string out = "episode,return\n";
  for (std::size_t i = 0; i < returns.size(); ++i) out += std::to_string(i + 1) + "," + format_double(returns[i]) + "\n";
  return out;
}

}  // namespace navmem
