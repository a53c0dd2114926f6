#include "navmem/dqn.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "navmem/expert.hpp"

namespace navmem {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition transition) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
    return;
  }
  items_[head_] = std::move(transition);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("sampling an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&items_[static_cast<std::size_t>(rng() % items_.size())]);
  return out;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Action epsilon_greedy(const Tensor& q_values, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && unit_uniform(rng) < epsilon) return action_from_index(static_cast<int>(rng() % kNumActions));
  return greedy_action(q_values);
}

void DqnConfig::validate() const {
  if (budget < 1000) throw std::invalid_argument("DQN budget must be at least 1000 steps");
  if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in [0, 1]");
  if (target_sync < 1 || batch_size < 1 || train_every < 1 || learning_starts < 0) {
    throw std::invalid_argument("DQN schedule values must be positive");
  }
  if (!(learning_rate > 0.0) || !(clip_norm > 0.0)) throw std::invalid_argument("DQN rates must be positive");
  if (!(epsilon_fraction > 0.0)) throw std::invalid_argument("epsilon_fraction must be positive");
}

double epsilon_at(const DqnConfig& config, int step) {
  const double horizon = config.epsilon_fraction * config.budget;
  const double t = std::min(1.0, static_cast<double>(step) / horizon);
  return config.epsilon_start + t * (config.epsilon_end - config.epsilon_start);
}

namespace {

double max_target_q(const Tensor& next_input, const ModelParams& target, const ModelConfig& model) {
  const Tensor next_q = dqn_forward(next_input, target, model.sensor_radius);
  return *std::max_element(next_q.data().begin(), next_q.data().end());
}

ad::Var td_loss_to(ad::Tape& tape, const BoundParams& online, const ModelConfig& model, const Transition& transition,
                   double y) {
  const StepVars out = forward_step(tape, online, model, transition.input, Pose{}, nullptr);
  return ad::squared_error(tape, ad::pick(tape, out.logits, action_index(transition.action)), y);
}

/// max_a Q_target(s', a) memoized per distinct input; valid until the next sync.
class TargetCache {
 public:
  double lookup(const Tensor& next_input, const ModelParams& target, const ModelConfig& model) {
    std::string key(reinterpret_cast<const char*>(next_input.raw()), next_input.size() * sizeof(double));
    const auto [it, inserted] = values_.try_emplace(std::move(key), 0.0);
    if (inserted) it->second = max_target_q(next_input, target, model);
    return it->second;
  }
  void clear() { values_.clear(); }

 private:
  std::unordered_map<std::string, double> values_;
};

}  // namespace

ad::Var td_loss(ad::Tape& tape, const BoundParams& online, const ModelParams& target, const ModelConfig& model,
                const Transition& transition, double discount) {
  double y = transition.reward;
  if (!transition.terminal) y += discount * max_target_q(transition.next_input, target, model);
  return td_loss_to(tape, online, model, transition, y);
}

DqnResult dqn_train(const std::vector<GridMap>& maps, const ModelConfig& model, const DqnConfig& config) {
  config.validate();
  if (model.kind != ModelKind::DQN) throw std::invalid_argument("dqn_train needs a DQN model config");
  if (maps.empty()) throw std::invalid_argument("dqn_train: no maps");
  const int r = model.sensor_radius;

  DqnResult result;
  result.params = init_params(model, model.seed);
  ModelParams target = result.params;
  TargetCache target_cache;
  AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  ReplayBuffer replay(config.replay_capacity);
  std::mt19937_64 rng(config.seed);

  std::size_t map_index = 0;
  const GridMap* map = &maps[0];
  int episode_budget_steps = episode_budget(*map);
  EnvState env = reset_env(*map, r);
  Tensor obs = encode_sensor_input(sense(*map, env.pose, r), map->goal());
  double episode_return = 0.0;

  for (int t = 0; t < config.budget; ++t) {
    const double eps = epsilon_at(config, t);
    Action a;
    if (eps > 0.0 && unit_uniform(rng) < eps) {
      a = action_from_index(static_cast<int>(rng() % kNumActions));
    } else {
      a = greedy_action(dqn_forward(obs, result.params, r));
    }
    advance_env(env, a, r);
    const bool at_goal = env.pose == map->goal();
    const double reward = at_goal ? 1.0 : 0.0;
    Tensor next_obs = encode_sensor_input(sense(*map, env.pose, r), map->goal());
    episode_return += reward;
    replay.push({obs, a, reward, next_obs, at_goal});
    obs = std::move(next_obs);

    if (at_goal || env.steps_taken >= episode_budget_steps) {
      result.episode_returns.push_back(episode_return);
      result.goal_reached += at_goal ? 1 : 0;
      ++result.episodes;
      episode_return = 0.0;
      map_index = (map_index + 1) % maps.size();
      map = &maps[map_index];
      episode_budget_steps = episode_budget(*map);
      env = reset_env(*map, r);
      obs = encode_sensor_input(sense(*map, env.pose, r), map->goal());
    }

    if (t + 1 >= config.learning_starts && (t + 1) % config.train_every == 0) {
      const auto batch = replay.sample(static_cast<std::size_t>(config.batch_size), rng);
      ad::Tape tape;
      const BoundParams online(tape, result.params);
      ad::Var total;
      for (const Transition* tr : batch) {
        double y = tr->reward;
        if (!tr->terminal) y += config.discount * target_cache.lookup(tr->next_input, target, model);
        const ad::Var loss = td_loss_to(tape, online, model, *tr, y);
        total = total ? ad::add(tape, total, loss) : loss;
      }
      tape.backward(total);
      NamedTensors grads = online.gradients();
      scale_all(grads, 1.0 / static_cast<double>(batch.size()));
      clip_by_global_norm(grads, config.clip_norm);
      adam_step(result.params, grads, adam);
    }
    if ((t + 1) % config.target_sync == 0) {
      target = result.params;
      target_cache.clear();
    }
  }
  return result;
}

}  // namespace navmem
