#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "navmem/gridworld.hpp"
#include "navmem/models.hpp"

namespace navmem {

struct Transition {
  Tensor input;
  Action action = Action::Down;
  double reward = 0.0;  // 1 only on reaching the goal
  Tensor next_input;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Oldest-first view position `i` (0 = oldest still held).
  const Transition& at(std::size_t i) const;
  /// `count` indices drawn uniformly with replacement.
  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

/// Uniform double in [0, 1) from 53 random bits.
double unit_uniform(std::mt19937_64& rng);

/// Uniform action with probability epsilon, else the lowest-index argmax.
Action epsilon_greedy(const Tensor& q_values, double epsilon, std::mt19937_64& rng);

struct DqnConfig {
  int budget = 200000;  // environment steps
  double discount = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_fraction = 0.5;  // of the budget spent annealing
  int target_sync = 1000;
  int batch_size = 32;
  int learning_starts = 1000;
  int train_every = 4;
  double learning_rate = 1e-4;
  double clip_norm = 10.0;
  std::size_t replay_capacity = 100000;
  std::uint64_t seed = 0;

  void validate() const;
};

double epsilon_at(const DqnConfig& config, int step);

struct DqnResult {
  ModelParams params;
  std::vector<double> episode_returns;
  int episodes = 0;
  int goal_reached = 0;
};

/// Epsilon-greedy Q-learning over sensor inputs. Episodes cycle through
/// `maps`; each lasts until the goal or the map's step budget.
DqnResult dqn_train(const std::vector<GridMap>& maps, const ModelConfig& model, const DqnConfig& config);

/// Squared TD error of one transition against a target network, on `tape`.
ad::Var td_loss(ad::Tape& tape, const BoundParams& online, const ModelParams& target, const ModelConfig& model,
                const Transition& transition, double discount);

}  // namespace navmem
