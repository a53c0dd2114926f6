#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "navmem/autodiff.hpp"
#include "navmem/gridworld.hpp"
#include "navmem/ops.hpp"
#include "navmem/optim.hpp"
#include "navmem/tensor.hpp"

namespace navmem {

enum class ModelKind : std::uint8_t { CNN, CNN_LSTM, VIN, VIN_LSTM, VIN_PARTIALMAP, DQN };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class InputKind : std::uint8_t { Sensor, PartialMap };

InputKind input_kind(ModelKind kind);
bool is_recurrent(ModelKind kind);
bool is_vin(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::VIN_PARTIALMAP;
  std::optional<int> vi_iterations;  // empty = Auto, 2*(H+W) of the input grid
  int q_channels = 10;
  int hidden_size = 256;
  std::array<int, 2> conv_widths = {32, 64};
  int fc_width = 128;
  int sensor_radius = 3;
  std::uint64_t seed = 0;

  int input_channels() const { return input_kind(kind) == InputKind::Sensor ? 2 : 3; }
  int patch_side() const { return 2 * sensor_radius + 1; }
  int resolve_iterations(int height, int width) const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using ModelParams = NamedTensors;

/// Seeded fan-in-scaled uniform weights, zero biases, LSTM forget bias +1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Names and shapes only, in creation order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);
std::size_t parameter_count(const ModelParams& params);

struct HiddenState {
  Tensor h;
  Tensor c;
  bool empty() const { return h.empty(); }
};

HiddenState zero_hidden(const ModelConfig& config);

struct PolicyOutput {
  Tensor logits;  // Action index order
  std::optional<Tensor> attended_q;
};

/// Lowest index wins ties.
Action greedy_action(const Tensor& scores);

/// Parameters registered as leaves of one tape.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ModelParams& params);
  const ad::Var& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;
  /// Gradient for every parameter (zeros where nothing flowed).
  NamedTensors gradients() const;

 private:
  std::vector<std::pair<std::string, ad::Var>> vars_;
};

struct StepVars {
  ad::Var logits;
  ad::Var attended_q;  // VIN kinds
  ad::Var values;      // VIN kinds: V after the last sweep, 1xHxW
};

/// One policy step on a tape. `hidden` is read and advanced for recurrent kinds.
StepVars forward_step(ad::Tape& tape, const BoundParams& params, const ModelConfig& config, const Tensor& input,
                      Pose attention, ad::LstmState* hidden);

/// Hidden state values as tape constants, and back.
ad::LstmState hidden_vars(ad::Tape& tape, const HiddenState& hidden);
HiddenState hidden_values(const ad::LstmState& vars);

// Value-level entry points for each architecture.

/// `values_out`, when given, receives V after the final sweep.
PolicyOutput vin_forward(const Tensor& input, Pose attention_at, const ModelParams& params, int iterations,
                         Tensor* values_out = nullptr);
std::pair<PolicyOutput, HiddenState> vin_lstm_forward(const Tensor& input, Pose attention_at, const HiddenState& hidden,
                                                      const ModelParams& params, int iterations);
PolicyOutput cnn_forward(const Tensor& input, const ModelParams& params, int sensor_radius);
std::pair<PolicyOutput, HiddenState> cnn_lstm_forward(const Tensor& input, const HiddenState& hidden,
                                                      const ModelParams& params, int sensor_radius);
Tensor dqn_forward(const Tensor& input, const ModelParams& params, int sensor_radius);

/// VIN weights that run exact value iteration with 4 Q channels over a
/// (occupancy, goal) input: R = 10*goal - 1 - 100*occupancy and
/// V'(s) = max_a R(s+d_a) + V(s+d_a).
ModelParams handcrafted_vi_params();

/// Dynamic-programming evaluation of the same recurrence. Off-grid
/// neighbors contribute R = V = 0, matching the zero padding of the R and V
/// channels. Returns V after `iterations` sweeps, row-major.
std::vector<double> tabular_vi_oracle(const std::vector<std::uint8_t>& occupancy, int height, int width, Pose goal,
                                      int iterations);

}  // namespace navmem
