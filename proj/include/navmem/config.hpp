#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navmem/dqn.hpp"
#include "navmem/gridworld.hpp"
#include "navmem/models.hpp"
#include "navmem/training.hpp"

namespace navmem {

struct DataSection {
  int trajectories = 100;
  int holdout_trajectories = 20;
};

struct EvalSection {
  int maps = 100;
  std::uint64_t map_seed = 7777;
  std::vector<int> lengths = {20, 50, 100, 200, 500};
  int seeds_per_length = 5;
};

struct RunConfig {
  CuldesacSpec culdesac;  // pocket length and width for training maps
  int sensor_radius = 3;
  std::uint64_t seed = 0;
  std::string out = "out";
  DataSection data;
  ModelConfig model;
  std::optional<TrainConfig> train;  // empty: per-kind defaults
  DqnConfig dqn;
  EvalSection eval;

  TrainConfig resolved_train() const;
  void validate() const;
};

/// Parses a JSON object; every key is optional, unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string write_run_config(const RunConfig& config);

/// Seeds for the training and held-out datasets derived from the run seed.
std::uint64_t training_map_seed(std::uint64_t run_seed);
std::uint64_t holdout_map_seed(std::uint64_t run_seed);

/// Comma-separated integers.
std::vector<int> parse_int_list(const std::string& csv);

}  // namespace navmem
