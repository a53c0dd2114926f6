#include "navmem/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "navmem/json_io.hpp"

namespace navmem {

using nlohmann::json;

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train ? *train : default_train_config(model.kind);
  return t;
}

void RunConfig::validate() const {
  culdesac.validate();
  if (sensor_radius < 1) throw std::invalid_argument("sensor_radius must be positive");
  if (model.sensor_radius != sensor_radius) throw std::invalid_argument("model.sensor_radius must equal sensor_radius");
  model.validate();
  resolved_train().validate();
  dqn.validate();
  if (data.trajectories < 1) throw std::invalid_argument("data.trajectories must be positive");
  if (data.holdout_trajectories < 0) throw std::invalid_argument("data.holdout_trajectories must be non-negative");
  if (eval.maps < 1 || eval.seeds_per_length < 1) throw std::invalid_argument("eval counts must be positive");
  if (out.empty()) throw std::invalid_argument("out must be a directory path");
}

namespace {

TrainConfig parse_train(const json& j, TrainConfig t) {
  reject_unknown_keys(j, {"epochs", "batch_size", "learning_rate", "seed", "eval_every", "clip_norm"}, "train");
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.seed = j.value("seed", t.seed);
  t.eval_every = j.value("eval_every", t.eval_every);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  return t;
}

json train_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},         {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
              {"seed", t.seed},             {"eval_every", t.eval_every}, {"clip_norm", t.clip_norm}};
}

DqnConfig parse_dqn(const json& j, DqnConfig d) {
  reject_unknown_keys(j, {"budget", "discount", "epsilon_start", "epsilon_end", "epsilon_fraction", "target_sync",
                          "batch_size", "learning_starts", "train_every", "learning_rate", "clip_norm",
                          "replay_capacity", "seed"},
                      "dqn");
  d.budget = j.value("budget", d.budget);
  d.discount = j.value("discount", d.discount);
  d.epsilon_start = j.value("epsilon_start", d.epsilon_start);
  d.epsilon_end = j.value("epsilon_end", d.epsilon_end);
  d.epsilon_fraction = j.value("epsilon_fraction", d.epsilon_fraction);
  d.target_sync = j.value("target_sync", d.target_sync);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.learning_starts = j.value("learning_starts", d.learning_starts);
  d.train_every = j.value("train_every", d.train_every);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.clip_norm = j.value("clip_norm", d.clip_norm);
  d.replay_capacity = j.value("replay_capacity", d.replay_capacity);
  d.seed = j.value("seed", d.seed);
  return d;
}

json dqn_json(const DqnConfig& d) {
  return json{{"budget", d.budget},
              {"discount", d.discount},
              {"epsilon_start", d.epsilon_start},
              {"epsilon_end", d.epsilon_end},
              {"epsilon_fraction", d.epsilon_fraction},
              {"target_sync", d.target_sync},
              {"batch_size", d.batch_size},
              {"learning_starts", d.learning_starts},
              {"train_every", d.train_every},
              {"learning_rate", d.learning_rate},
              {"clip_norm", d.clip_norm},
              {"replay_capacity", d.replay_capacity},
              {"seed", d.seed}};
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json j = json::parse(text);
  reject_unknown_keys(j, {"culdesac", "sensor_radius", "seed", "out", "data", "model", "train", "dqn", "eval"},
                      "config");
  RunConfig c;
  if (j.contains("culdesac")) c.culdesac = j.at("culdesac").get<CuldesacSpec>();
  c.sensor_radius = j.value("sensor_radius", c.sensor_radius);
  c.model.sensor_radius = c.sensor_radius;
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"trajectories", "holdout_trajectories"}, "data");
    c.data.trajectories = d.value("trajectories", c.data.trajectories);
    c.data.holdout_trajectories = d.value("holdout_trajectories", c.data.holdout_trajectories);
  }
  if (j.contains("model")) {
    json m = j.at("model");
    if (!m.contains("sensor_radius")) m["sensor_radius"] = c.sensor_radius;
    c.model = m.get<ModelConfig>();
  }
  if (j.contains("train")) c.train = parse_train(j.at("train"), default_train_config(c.model.kind));
  if (j.contains("dqn")) c.dqn = parse_dqn(j.at("dqn"), c.dqn);
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown_keys(e, {"maps", "map_seed", "lengths", "seeds_per_length"}, "eval");
    c.eval.maps = e.value("maps", c.eval.maps);
    c.eval.map_seed = e.value("map_seed", c.eval.map_seed);
    if (e.contains("lengths")) c.eval.lengths = e.at("lengths").get<std::vector<int>>();
    c.eval.seeds_per_length = e.value("seeds_per_length", c.eval.seeds_per_length);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string write_run_config(const RunConfig& c) {
  json j{{"culdesac", c.culdesac},
         {"sensor_radius", c.sensor_radius},
         {"seed", c.seed},
         {"out", c.out},
         {"data", {{"trajectories", c.data.trajectories}, {"holdout_trajectories", c.data.holdout_trajectories}}},
         {"model", c.model},
         {"train", train_json(c.resolved_train())},
         {"dqn", dqn_json(c.dqn)},
         {"eval",
          {{"maps", c.eval.maps},
           {"map_seed", c.eval.map_seed},
           {"lengths", c.eval.lengths},
           {"seeds_per_length", c.eval.seeds_per_length}}}};
  return j.dump(2) + "\n";
}

std::uint64_t training_map_seed(std::uint64_t run_seed) { return run_seed * 1000003ULL + 1; }
std::uint64_t holdout_map_seed(std::uint64_t run_seed) { return run_seed * 1000003ULL + 500001; }

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw std::invalid_argument("empty entry in list '" + csv + "'");
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("not an integer: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace navmem
