#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "navmem/expert.hpp"
#include "navmem/models.hpp"

namespace navmem {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;  // steps (feedforward) or trajectories (recurrent)
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int eval_every = 1;
  double clip_norm = 10.0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Per-kind defaults used when a run does not override them.
TrainConfig default_train_config(ModelKind kind);

struct CurvePoint {
  int epoch = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double train_loss = 0.0;  // mean cross-entropy per step over the epoch
};

struct TrainResult {
  ModelParams params;
  std::vector<CurvePoint> curve;
};

/// Optional per-epoch observer, e.g. for progress logging.
using EpochHook = std::function<void(const CurvePoint&)>;

/// Behavior cloning. Feedforward kinds train on shuffled steps; recurrent
/// kinds unroll each whole trajectory from a zero hidden state.
/// `holdout` may be empty, in which case test errors are reported as 0.
TrainResult train_supervised(const Dataset& dataset, const Dataset& holdout, const TrainConfig& config,
                             const ModelConfig& model, const EpochHook& hook = {});

/// Same, starting from given parameters.
TrainResult train_supervised_from(ModelParams params, const Dataset& dataset, const Dataset& holdout,
                                  const TrainConfig& config, const ModelConfig& model, const EpochHook& hook = {});

/// Fraction of steps where the argmax of the logits differs from the expert,
/// under teacher forcing. Throws std::invalid_argument on an empty dataset.
double evaluate_error(const Dataset& dataset, const ModelParams& params, const ModelConfig& model);

/// The model input for one recorded step.
const Tensor& step_input(const TrajectoryStep& step, const ModelConfig& model);

/// Summed cross-entropy of one sample or one whole trajectory, recorded on `tape`.
ad::Var sample_loss(ad::Tape& tape, const BoundParams& params, const ModelConfig& model, const Trajectory& trajectory,
                    int step_index);
ad::Var trajectory_loss(ad::Tape& tape, const BoundParams& params, const ModelConfig& model,
                        const Trajectory& trajectory);

/// Throws when the dataset radius does not match the model.
void check_compatible(const Dataset& dataset, const ModelConfig& model);

}  // namespace navmem
