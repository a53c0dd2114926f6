// navmem: dataset generation, training, evaluation and sweeps for the
// cul-de-sac navigation workbench.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "navmem/checkpoint.hpp"
#include "navmem/config.hpp"
#include "navmem/dqn.hpp"
#include "navmem/eval.hpp"
#include "navmem/expert.hpp"
#include "navmem/training.hpp"

namespace fs = std::filesystem;
using namespace navmem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config = flags.config_path.empty() ? RunConfig{} : load_run_config(flags.config_path);
  if (flags.seed) {
    config.seed = *flags.seed;
    config.model.seed = *flags.seed;
    if (config.train) config.train->seed = *flags.seed;
    config.dqn.seed = *flags.seed;
  }
  if (!flags.out.empty()) config.out = flags.out;
  if (!flags.model.empty()) config.model.kind = parse_model_kind(flags.model);
  config.validate();
  return config;
}

TrainConfig train_config_for(const RunConfig& config) {
  TrainConfig t = config.resolved_train();
  if (!config.train) t.seed = config.seed;
  return t;
}

int cmd_gen(const RunConfig& config, std::optional<int> traj) {
  const int count = traj.value_or(config.data.trajectories);
  if (count < 1) throw std::invalid_argument("--traj must be at least 1");
  const fs::path out(config.out);
  fs::create_directories(out / "maps");

  const auto train_cases =
      jittered_cases(config.culdesac.pocket_length, count, training_map_seed(config.seed), config.culdesac);
  const Dataset train = build_dataset(to_entries(train_cases), config.sensor_radius);
  save_dataset(train, (out / "dataset.jsonl").string());
  for (std::size_t i = 0; i < train_cases.size(); ++i) {
    const GridMap map = generate_culdesac(train_cases[i].spec, train_cases[i].seed);
    write_file(out / "maps" / ("train_" + std::to_string(i) + ".txt"), write_map_text(map));
  }
  std::size_t holdout_steps = 0;
  if (config.data.holdout_trajectories > 0) {
    const auto holdout_cases = jittered_cases(config.culdesac.pocket_length, config.data.holdout_trajectories,
                                              holdout_map_seed(config.seed), config.culdesac);
    const Dataset holdout = build_dataset(to_entries(holdout_cases), config.sensor_radius);
    save_dataset(holdout, (out / "holdout.jsonl").string());
    holdout_steps = holdout.total_steps();
  }
  const AliasReport aliases = find_aliased_pairs(train);
  std::cout << "trajectories: " << train.trajectories.size() << "\n"
            << "steps: " << train.total_steps() << "\n"
            << "holdout_steps: " << holdout_steps << "\n"
            << "alias_pairs: " << aliases.count << "\n"
            << "memoryless_error_lower_bound: " << memoryless_error_lower_bound(train) << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& dataset_path, std::optional<int> budget) {
  const fs::path out(config.out);
  fs::create_directories(out);
  const fs::path ckpt_path = out / "checkpoint.ckpt";
  if (config.model.kind == ModelKind::DQN) {
    DqnConfig dqn = config.dqn;
    if (budget) dqn.budget = *budget;
    const GridMap map = generate_culdesac(config.culdesac, config.seed);
    const DqnResult result = dqn_train({map}, config.model, dqn);
    save_checkpoint({config.model, result.params}, ckpt_path.string());
    write_file(out / "rewards.csv", write_reward_csv(result.episode_returns));
    const NetworkPolicy policy(config.model, result.params);
    const RolloutResult greedy = rollout(map, policy, config.sensor_radius);
    std::cout << "episodes: " << result.episodes << "\n"
              << "goal_reached: " << result.goal_reached << "\n"
              << "greedy_success: " << (greedy.success ? 1 : 0) << "\n";
    return 0;
  }

  const std::string path = dataset_path.empty() ? (out / "dataset.jsonl").string() : dataset_path;
  const Dataset train = load_dataset(path);
  check_compatible(train, config.model);
  Dataset holdout;
  holdout.radius = train.radius;
  const fs::path holdout_path = fs::path(path).parent_path() / "holdout.jsonl";
  if (fs::exists(holdout_path)) holdout = load_dataset(holdout_path.string());

  const TrainConfig tc = train_config_for(config);
  const TrainResult result = train_supervised(train, holdout, tc, config.model, [](const CurvePoint& p) {
    std::cerr << "epoch " << p.epoch << " loss " << p.train_loss << " train_error " << p.train_error
              << " test_error " << p.test_error << "\n";
  });
  save_checkpoint({config.model, result.params}, ckpt_path.string());
  write_file(out / "curves.csv", write_curve_csv(result.curve));
  if (!result.curve.empty()) {
    std::cout << "final_train_error: " << result.curve.back().train_error << "\n"
              << "final_test_error: " << result.curve.back().test_error << "\n";
  }
  if (!is_recurrent(config.model.kind) && input_kind(config.model.kind) == InputKind::Sensor) {
    std::cout << "memoryless_error_lower_bound: " << memoryless_error_lower_bound(train) << "\n";
  }
  return 0;
}

std::unique_ptr<Policy> load_policy(bool oracle, const std::string& checkpoint_path) {
  if (oracle) return std::make_unique<ReplannerPolicy>();
  if (checkpoint_path.empty()) throw std::invalid_argument("need --checkpoint PATH or --oracle");
  if (!fs::exists(checkpoint_path)) throw std::runtime_error("checkpoint not found: " + checkpoint_path);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  return std::make_unique<NetworkPolicy>(ck.config, std::move(ck.params));
}

int cmd_eval(const RunConfig& config, bool oracle, const std::string& checkpoint, std::optional<int> budget) {
  const auto policy = load_policy(oracle, checkpoint);
  const auto cases =
      jittered_cases(config.culdesac.pocket_length, config.eval.maps, config.eval.map_seed, config.culdesac);
  const EvalReport report = evaluate(cases, *policy, config.sensor_radius, budget);
  fs::create_directories(config.out);
  write_file(fs::path(config.out) / "report.json", write_report(report));
  std::cout << "success_percentage: " << report.success_percentage << "\n"
            << "mean_success_steps: " << report.mean_success_steps << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& config, bool oracle, const std::string& checkpoint, const std::string& lengths_csv,
              std::optional<int> budget) {
  const std::vector<int> lengths = lengths_csv.empty() ? config.eval.lengths : parse_int_list(lengths_csv);
  const auto policy = load_policy(oracle, checkpoint);
  SweepOptions options;
  options.seeds_per_length = config.eval.seeds_per_length;
  options.seed = config.eval.map_seed;
  options.base = config.culdesac;
  options.budget = budget;
  const SweepReport report = generalization_sweep(*policy, lengths, config.sensor_radius, options);
  fs::create_directories(config.out);
  write_file(fs::path(config.out) / "sweep.csv", write_sweep_csv(report));
  std::cout << "max_generalization_length: " << report.max_generalization_length << "\n";
  return 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration (unknown keys rejected)");
  cmd->add_option("--seed", flags.seed, "Run seed; overrides config seeds (default 0)");
  cmd->add_option("--out", flags.out, "Output directory (default out)");
  cmd->add_option("--model", flags.model, "Model kind: CNN, CNN_LSTM, VIN, VIN_LSTM, VIN_PARTIALMAP, DQN (default VIN_PARTIALMAP)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cul-de-sac navigation workbench: expert datasets, policy training, evaluation"};
  app.require_subcommand(1);
  app.footer("Default configuration (any subset may be given with --config):\n" + write_run_config(RunConfig{}) +
             "Training defaults for recurrent kinds: epochs 60, batch_size 4 trajectories.\n"
             "Environment: NAV_THREADS caps worker threads (default: machine cores).");

  CommonFlags flags;
  std::optional<int> traj;
  std::optional<int> budget;
  std::string dataset;
  std::string checkpoint;
  std::string lengths;
  bool oracle = false;

  CLI::App* gen = app.add_subcommand("gen", "Build the expert dataset, held-out dataset and map files");
  add_common(gen, flags);
  gen->add_option("--traj", traj, "Number of training trajectories (default 100)");

  CLI::App* train = app.add_subcommand("train", "Train the model kind; writes checkpoint.ckpt and curves/rewards CSV");
  add_common(train, flags);
  train->add_option("--dataset", dataset, "Training dataset (default <out>/dataset.jsonl)");
  train->add_option("--budget", budget, "DQN environment-step budget (default 200000)");

  CLI::App* eval = app.add_subcommand("eval", "Roll out a policy on held-out maps; writes report.json");
  add_common(eval, flags);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  eval->add_flag("--oracle", oracle, "Evaluate the replanning expert instead of a checkpoint");
  eval->add_option("--budget", budget, "Per-rollout step budget (default 10*optimal+100)");

  CLI::App* sweep = app.add_subcommand("sweep", "Generalization sweep over pocket lengths; writes sweep.csv");
  add_common(sweep, flags);
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  sweep->add_flag("--oracle", oracle, "Sweep the replanning expert instead of a checkpoint");
  sweep->add_option("--lengths", lengths, "Comma-separated increasing lengths (default 20,50,100,200,500)");
  sweep->add_option("--budget", budget, "Per-rollout step budget (default 10*optimal+100)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = resolve_config(flags);
    if (gen->parsed()) return cmd_gen(config, traj);
    if (train->parsed()) return cmd_train(config, dataset, budget);
    if (eval->parsed()) return cmd_eval(config, oracle, checkpoint, budget);
    if (sweep->parsed()) {
      if (sweep->count("--lengths") > 0 && lengths.empty()) throw std::invalid_argument("--lengths is empty");
      return cmd_sweep(config, oracle, checkpoint, lengths, budget);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
