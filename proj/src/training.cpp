#include "navmem/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>

#include "navmem/parallel.hpp"

namespace navmem {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
}

TrainConfig default_train_config(ModelKind kind) {
  TrainConfig c;
  if (is_recurrent(kind)) {
    c.epochs = 60;
    c.batch_size = 4;
  }
  return c;
}

const Tensor& step_input(const TrajectoryStep& step, const ModelConfig& model) {
  return input_kind(model.kind) == InputKind::PartialMap ? step.partialmap_input : step.sensor_input;
}

void check_compatible(const Dataset& dataset, const ModelConfig& model) {
  if (model.kind == ModelKind::DQN) throw std::invalid_argument("DQN is not trained by behavior cloning");
  if (dataset.radius != model.sensor_radius) {
    throw std::invalid_argument("dataset sensor radius " + std::to_string(dataset.radius) +
                                " does not match model radius " + std::to_string(model.sensor_radius));
  }
  if (dataset.encoder_version != kEncoderVersion) throw std::invalid_argument("dataset encoder version mismatch");
}

ad::Var sample_loss(ad::Tape& tape, const BoundParams& params, const ModelConfig& model, const Trajectory& trajectory,
                    int step_index) {
  const TrajectoryStep& s = trajectory.steps.at(static_cast<std::size_t>(step_index));
  const StepVars out = forward_step(tape, params, model, step_input(s, model), s.pose, nullptr);
  return ad::softmax_cross_entropy(tape, out.logits, action_index(s.expert_action));
}

ad::Var trajectory_loss(ad::Tape& tape, const BoundParams& params, const ModelConfig& model,
                        const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw std::invalid_argument("trajectory has no steps");
  ad::LstmState hidden = hidden_vars(tape, zero_hidden(model));
  ad::Var total;
  for (const TrajectoryStep& s : trajectory.steps) {
    const StepVars out = forward_step(tape, params, model, step_input(s, model), s.pose, &hidden);
    const ad::Var loss = ad::softmax_cross_entropy(tape, out.logits, action_index(s.expert_action));
    total = total ? ad::add(tape, total, loss) : loss;
  }
  return total;
}

namespace {

struct UnitGrad {
  NamedTensors grads;
  double loss = 0.0;
};

// Units per tape. Fixed so that the reduction order never depends on the
// worker count.
constexpr std::size_t kGroupSize = 8;

UnitGrad group_gradient(const ModelParams& params, const ModelConfig& model, const Dataset& dataset,
                        std::span<const StepRef> units) {
  const bool recurrent = is_recurrent(model.kind);
  ad::Tape tape;
  const BoundParams bound(tape, params);
  ad::Var total;
  for (const StepRef& u : units) {
    const Trajectory& traj = dataset.trajectories[u.trajectory];
    const ad::Var loss = recurrent ? trajectory_loss(tape, bound, model, traj)
                                   : sample_loss(tape, bound, model, traj, static_cast<int>(u.step));
    total = total ? ad::add(tape, total, loss) : loss;
  }
  tape.backward(total);
  return {bound.gradients(), total.value().item()};
}

std::vector<StepRef> all_steps(const Dataset& dataset) {
  std::vector<StepRef> refs;
  for (std::size_t t = 0; t < dataset.trajectories.size(); ++t) {
    for (std::size_t s = 0; s < dataset.trajectories[t].steps.size(); ++s) {
      refs.push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s)});
    }
  }
  return refs;
}

template <class T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Misclassified steps in one trajectory under teacher forcing.
std::size_t trajectory_mistakes(const Trajectory& trajectory, const ModelParams& params, const ModelConfig& model) {
  ad::Tape tape(false);
  const BoundParams bound(tape, params);
  ad::LstmState hidden;
  const bool recurrent = is_recurrent(model.kind);
  if (recurrent) hidden = hidden_vars(tape, zero_hidden(model));
  std::size_t wrong = 0;
  for (const TrajectoryStep& s : trajectory.steps) {
    const StepVars out =
        forward_step(tape, bound, model, step_input(s, model), s.pose, recurrent ? &hidden : nullptr);
    if (greedy_action(out.logits.value()) != s.expert_action) ++wrong;
  }
  return wrong;
}

}  // namespace

double evaluate_error(const Dataset& dataset, const ModelParams& params, const ModelConfig& model) {
  const std::size_t total = dataset.total_steps();
  if (total == 0) throw std::invalid_argument("evaluate_error: empty dataset");
  check_compatible(dataset, model);
  std::vector<std::size_t> wrong(dataset.trajectories.size(), 0);
  parallel_for(dataset.trajectories.size(),
               [&](std::size_t i) { wrong[i] = trajectory_mistakes(dataset.trajectories[i], params, model); });
  const std::size_t mistakes = std::accumulate(wrong.begin(), wrong.end(), std::size_t{0});
  return static_cast<double>(mistakes) / static_cast<double>(total);
}

TrainResult train_supervised(const Dataset& dataset, const Dataset& holdout, const TrainConfig& config,
                             const ModelConfig& model, const EpochHook& hook) {
  return train_supervised_from(init_params(model, model.seed), dataset, holdout, config, model, hook);
}

TrainResult train_supervised_from(ModelParams params, const Dataset& dataset, const Dataset& holdout,
                                  const TrainConfig& config, const ModelConfig& model, const EpochHook& hook) {
  config.validate();
  model.validate();
  if (dataset.total_steps() == 0) throw std::invalid_argument("train_supervised: empty dataset");
  check_compatible(dataset, model);
  if (holdout.total_steps() > 0) check_compatible(holdout, model);

  const bool recurrent = is_recurrent(model.kind);
  std::vector<StepRef> units;
  if (recurrent) {
    for (std::size_t t = 0; t < dataset.trajectories.size(); ++t) {
      if (!dataset.trajectories[t].steps.empty()) units.push_back({static_cast<std::uint32_t>(t), 0});
    }
  } else {
    units = all_steps(dataset);
  }

  AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  const std::size_t workers = static_cast<std::size_t>(std::max(1, worker_count()));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    seeded_shuffle(units, rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < units.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(units.size(), begin + static_cast<std::size_t>(config.batch_size));
      NamedTensors batch_grad;
      double batch_steps = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const StepRef u = units[k];
        batch_steps += recurrent ? static_cast<double>(dataset.trajectories[u.trajectory].steps.size()) : 1.0;
      }
      // Groups are computed in waves of `workers` and reduced in group order.
      const std::size_t groups = (end - begin + kGroupSize - 1) / kGroupSize;
      for (std::size_t wave = 0; wave < groups; wave += workers) {
        std::vector<UnitGrad> slots(std::min(groups, wave + workers) - wave);
        parallel_for(slots.size(), [&](std::size_t k) {
          const std::size_t first = begin + (wave + k) * kGroupSize;
          const std::size_t count = std::min(kGroupSize, end - first);
          slots[k] = group_gradient(params, model, dataset, std::span<const StepRef>(units).subspan(first, count));
        });
        for (UnitGrad& slot : slots) {
          if (batch_grad.empty()) {
            batch_grad = std::move(slot.grads);
          } else {
            accumulate(batch_grad, slot.grads);
          }
          epoch_loss += slot.loss;
        }
      }
      scale_all(batch_grad, 1.0 / batch_steps);
      clip_by_global_norm(batch_grad, config.clip_norm);
      adam_step(params, batch_grad, adam);
    }
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      CurvePoint point;
      point.epoch = epoch;
      point.train_loss = epoch_loss / static_cast<double>(dataset.total_steps());
      point.train_error = evaluate_error(dataset, params, model);
      point.test_error = holdout.total_steps() > 0 ? evaluate_error(holdout, params, model) : 0.0;
      result.curve.push_back(point);
      if (hook) hook(point);
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace navmem
