#include "navmem/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace navmem {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::CNN: return "CNN";
    case ModelKind::CNN_LSTM: return "CNN_LSTM";
    case ModelKind::VIN: return "VIN";
    case ModelKind::VIN_LSTM: return "VIN_LSTM";
    case ModelKind::VIN_PARTIALMAP: return "VIN_PARTIALMAP";
    case ModelKind::DQN: return "DQN";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::CNN, ModelKind::CNN_LSTM, ModelKind::VIN, ModelKind::VIN_LSTM, ModelKind::VIN_PARTIALMAP,
                 ModelKind::DQN}) {
    if (model_kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

InputKind input_kind(ModelKind kind) {
  return kind == ModelKind::VIN_PARTIALMAP ? InputKind::PartialMap : InputKind::Sensor;
}

bool is_recurrent(ModelKind kind) { return kind == ModelKind::CNN_LSTM || kind == ModelKind::VIN_LSTM; }

bool is_vin(ModelKind kind) {
  return kind == ModelKind::VIN || kind == ModelKind::VIN_LSTM || kind == ModelKind::VIN_PARTIALMAP;
}

int ModelConfig::resolve_iterations(int height, int width) const {
  return vi_iterations ? *vi_iterations : 2 * (height + width);
}

void ModelConfig::validate() const {
  if (vi_iterations && *vi_iterations < 1) throw std::invalid_argument("vi_iterations must be >= 1");
  if (q_channels < 1 || hidden_size < 1 || fc_width < 1) throw std::invalid_argument("layer widths must be positive");
  if (conv_widths[0] < 1 || conv_widths[1] < 1) throw std::invalid_argument("conv widths must be positive");
  if (sensor_radius < 1) throw std::invalid_argument("sensor_radius must be >= 1");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, Shape>> layout;
  int features = 0;
  if (is_vin(c.kind)) {
    layout.push_back({"vin.reward_conv.kernel", {1, c.input_channels(), 3, 3}});
    layout.push_back({"vin.reward_conv.bias", {1}});
    layout.push_back({"vin.q_conv.kernel", {c.q_channels, 2, 3, 3}});
    layout.push_back({"vin.q_conv.bias", {c.q_channels}});
    features = c.q_channels;
  } else {
    const int side = c.patch_side();
    layout.push_back({"cnn.conv1.kernel", {c.conv_widths[0], c.input_channels(), 3, 3}});
    layout.push_back({"cnn.conv1.bias", {c.conv_widths[0]}});
    layout.push_back({"cnn.conv2.kernel", {c.conv_widths[1], c.conv_widths[0], 3, 3}});
    layout.push_back({"cnn.conv2.bias", {c.conv_widths[1]}});
    layout.push_back({"cnn.fc.weight", {c.fc_width, c.conv_widths[1] * side * side}});
    layout.push_back({"cnn.fc.bias", {c.fc_width}});
    features = c.fc_width;
  }
  if (is_recurrent(c.kind)) {
    const int h = c.hidden_size;
    layout.push_back({"lstm.w_x", {4 * h, features}});
    layout.push_back({"lstm.w_h", {4 * h, h}});
    layout.push_back({"lstm.bias", {4 * h}});
    features = h;
  }
  layout.push_back({"head.weight", {kNumActions, features}});
  layout.push_back({"head.bias", {kNumActions}});
  return layout;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * bound;
  };
  ModelParams params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    Tensor t(shape, 0.0);
    if (shape.size() >= 2) {
      const double fan_in = static_cast<double>(t.size() / static_cast<std::size_t>(shape[0]));
      const double bound = 1.0 / std::sqrt(fan_in);
      for (double& v : t.data()) v = uniform(bound);
    } else if (name == "lstm.bias") {
      const int h = shape[0] / 4;
      for (int i = h; i < 2 * h; ++i) t[static_cast<std::size_t>(i)] = 1.0;
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

HiddenState zero_hidden(const ModelConfig& config) {
  if (!is_recurrent(config.kind)) return {};
  return {Tensor({config.hidden_size}, 0.0), Tensor({config.hidden_size}, 0.0)};
}

Action greedy_action(const Tensor& scores) {
  if (scores.size() != static_cast<std::size_t>(kNumActions)) throw std::invalid_argument("expected 4 action scores");
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(best)]) best = a;
  }
  return action_from_index(best);
}

BoundParams::BoundParams(ad::Tape& tape, const ModelParams& params) {
  vars_.reserve(params.size());
  for (const auto& [name, t] : params) vars_.emplace_back(name, tape.parameter(t));
}

const ad::Var& BoundParams::operator[](std::string_view name) const {
  const auto it = std::lower_bound(vars_.begin(), vars_.end(), name,
                                   [](const auto& entry, std::string_view key) { return entry.first < key; });
  if (it == vars_.end() || it->first != name) throw std::out_of_range("missing parameter '" + std::string(name) + "'");
  return it->second;
}

bool BoundParams::contains(std::string_view name) const {
  return std::any_of(vars_.begin(), vars_.end(), [name](const auto& e) { return e.first == name; });
}

NamedTensors BoundParams::gradients() const {
  NamedTensors grads;
  for (const auto& [name, var] : vars_) grads.emplace(name, var.grad());
  return grads;
}

namespace {

std::vector<double> input_pads(int channels) {
  std::vector<double> pads(static_cast<std::size_t>(channels), 0.0);
  pads[0] = 1.0;  // occupancy: off-grid reads as wall
  return pads;
}

struct VinTrunk {
  ad::Var attended;
  ad::Var values;
};

VinTrunk vin_trunk(ad::Tape& tape, const BoundParams& p, const Tensor& input, int iterations, Pose attention) {
  if (iterations < 1) throw std::invalid_argument("VIN needs at least one iteration");
  if (input.rank() != 3 || input.dim(0) != p["vin.reward_conv.kernel"].value().dim(1)) {
    throw std::invalid_argument("VIN input shape " + shape_string(input.shape()) + " does not match parameters");
  }
  if (attention.row < 0 || attention.row >= input.dim(1) || attention.col < 0 || attention.col >= input.dim(2)) {
    throw std::out_of_range("attention index outside the input grid");
  }
  const ad::Var x = tape.constant(input);
  const std::vector<double> pads = input_pads(input.dim(0));
  const ad::Var reward = ad::conv2d(tape, x, p["vin.reward_conv.kernel"], p["vin.reward_conv.bias"], pads);
  const std::vector<double> zero_pads = {0.0, 0.0};
  ad::Var values = tape.constant(Tensor({1, input.dim(1), input.dim(2)}, 0.0));
  ad::Var q;
  for (int k = 0; k < iterations; ++k) {
    const ad::Var stacked = ad::concat(tape, {reward, values});
    q = ad::conv2d(tape, stacked, p["vin.q_conv.kernel"], p["vin.q_conv.bias"], zero_pads);
    values = ad::channel_max(tape, q).values;
  }
  return {ad::gather_at(tape, q, attention.row, attention.col), values};
}

ad::Var cnn_trunk(ad::Tape& tape, const BoundParams& p, const Tensor& input, int sensor_radius) {
  const int side = 2 * sensor_radius + 1;
  if (input.rank() != 3 || input.dim(0) != 2 || input.dim(1) != side || input.dim(2) != side) {
    throw std::invalid_argument("CNN expects a 2x" + std::to_string(side) + "x" + std::to_string(side) +
                                " patch, got " + shape_string(input.shape()));
  }
  const ad::Var x = tape.constant(input);
  const ad::Var h1 = ad::relu(tape, ad::conv2d(tape, x, p["cnn.conv1.kernel"], p["cnn.conv1.bias"], input_pads(2)));
  const std::vector<double> zeros(static_cast<std::size_t>(h1.shape()[0]), 0.0);
  const ad::Var h2 = ad::relu(tape, ad::conv2d(tape, h1, p["cnn.conv2.kernel"], p["cnn.conv2.bias"], zeros));
  const ad::Var flat = ad::reshape(tape, h2, {static_cast<int>(h2.value().size())});
  return ad::relu(tape, ad::linear(tape, flat, p["cnn.fc.weight"], p["cnn.fc.bias"]));
}

ad::Var lstm_step(ad::Tape& tape, const BoundParams& p, const ad::Var& x, ad::LstmState* hidden) {
  if (!hidden || !hidden->h) throw std::invalid_argument("recurrent model needs a hidden state");
  *hidden = ad::lstm_cell(tape, x, *hidden, p["lstm.w_x"], p["lstm.w_h"], p["lstm.bias"]);
  return hidden->h;
}

ad::Var head(ad::Tape& tape, const BoundParams& p, const ad::Var& features) {
  return ad::linear(tape, features, p["head.weight"], p["head.bias"]);
}

}  // namespace

StepVars forward_step(ad::Tape& tape, const BoundParams& p, const ModelConfig& config, const Tensor& input,
                      Pose attention, ad::LstmState* hidden) {
  StepVars out;
  switch (config.kind) {
    case ModelKind::CNN:
    case ModelKind::DQN:
      out.logits = head(tape, p, cnn_trunk(tape, p, input, config.sensor_radius));
      break;
    case ModelKind::CNN_LSTM:
      out.logits = head(tape, p, lstm_step(tape, p, cnn_trunk(tape, p, input, config.sensor_radius), hidden));
      break;
    case ModelKind::VIN:
    case ModelKind::VIN_LSTM:
    case ModelKind::VIN_PARTIALMAP: {
      if (input.rank() != 3) throw std::invalid_argument("VIN input must be CxHxW");
      Pose at = attention;
      if (config.kind != ModelKind::VIN_PARTIALMAP) {
        const int side = config.patch_side();
        if (input.dim(1) != side || input.dim(2) != side) throw std::invalid_argument("sensor VIN: wrong patch size");
        at = {config.sensor_radius, config.sensor_radius};
      }
      const VinTrunk trunk =
          vin_trunk(tape, p, input, config.resolve_iterations(input.dim(1), input.dim(2)), at);
      out.attended_q = trunk.attended;
      out.values = trunk.values;
      out.logits = config.kind == ModelKind::VIN_LSTM ? head(tape, p, lstm_step(tape, p, trunk.attended, hidden))
                                                      : head(tape, p, trunk.attended);
      break;
    }
  }
  return out;
}

ad::LstmState hidden_vars(ad::Tape& tape, const HiddenState& hidden) {
  return {tape.constant(hidden.h), tape.constant(hidden.c)};
}

HiddenState hidden_values(const ad::LstmState& vars) { return {vars.h.value(), vars.c.value()}; }

PolicyOutput vin_forward(const Tensor& input, Pose attention_at, const ModelParams& params, int iterations,
                         Tensor* values_out) {
  ad::Tape tape(false);
  const BoundParams p(tape, params);
  const VinTrunk trunk = vin_trunk(tape, p, input, iterations, attention_at);
  if (values_out) *values_out = trunk.values.value();
  return {head(tape, p, trunk.attended).value(), trunk.attended.value()};
}

std::pair<PolicyOutput, HiddenState> vin_lstm_forward(const Tensor& input, Pose attention_at, const HiddenState& hidden,
                                                      const ModelParams& params, int iterations) {
  ad::Tape tape(false);
  const BoundParams p(tape, params);
  const VinTrunk trunk = vin_trunk(tape, p, input, iterations, attention_at);
  ad::LstmState state = hidden_vars(tape, hidden);
  const ad::Var logits = head(tape, p, lstm_step(tape, p, trunk.attended, &state));
  return {PolicyOutput{logits.value(), trunk.attended.value()}, hidden_values(state)};
}

PolicyOutput cnn_forward(const Tensor& input, const ModelParams& params, int sensor_radius) {
  ad::Tape tape(false);
  const BoundParams p(tape, params);
  return {head(tape, p, cnn_trunk(tape, p, input, sensor_radius)).value(), std::nullopt};
}

std::pair<PolicyOutput, HiddenState> cnn_lstm_forward(const Tensor& input, const HiddenState& hidden,
                                                      const ModelParams& params, int sensor_radius) {
  ad::Tape tape(false);
  const BoundParams p(tape, params);
  ad::LstmState state = hidden_vars(tape, hidden);
  const ad::Var logits = head(tape, p, lstm_step(tape, p, cnn_trunk(tape, p, input, sensor_radius), &state));
  return {PolicyOutput{logits.value(), std::nullopt}, hidden_values(state)};
}

Tensor dqn_forward(const Tensor& input, const ModelParams& params, int sensor_radius) {
  return cnn_forward(input, params, sensor_radius).logits;
}

ModelParams handcrafted_vi_params() {
  ModelParams params;
  Tensor reward({1, 2, 3, 3}, 0.0);
  reward[4] = -100.0;     // occupancy, center tap
  reward[9 + 4] = 10.0;   // goal, center tap
  params.emplace("vin.reward_conv.kernel", std::move(reward));
  params.emplace("vin.reward_conv.bias", Tensor({1}, -1.0));
  Tensor q({kNumActions, 2, 3, 3}, 0.0);
  for (Action a : kAllActions) {
    const auto d = displacement(a);
    const std::size_t tap = static_cast<std::size_t>((1 + d.drow) * 3 + (1 + d.dcol));
    const std::size_t base = static_cast<std::size_t>(action_index(a)) * 18;
    q[base + tap] = 1.0;      // R channel
    q[base + 9 + tap] = 1.0;  // V channel
  }
  params.emplace("vin.q_conv.kernel", std::move(q));
  params.emplace("vin.q_conv.bias", Tensor({kNumActions}, 0.0));
  Tensor identity({kNumActions, kNumActions}, 0.0);
  for (int i = 0; i < kNumActions; ++i) identity[static_cast<std::size_t>(i * kNumActions + i)] = 1.0;
  params.emplace("head.weight", std::move(identity));
  params.emplace("head.bias", Tensor({kNumActions}, 0.0));
  return params;
}

std::vector<double> tabular_vi_oracle(const std::vector<std::uint8_t>& occupancy, int height, int width, Pose goal,
                                      int iterations) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (occupancy.size() != n) throw std::invalid_argument("tabular_vi_oracle: occupancy size");
  std::vector<double> reward(n);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      reward[i] = (Pose{r, c} == goal ? 10.0 : 0.0) - 1.0 - (occupancy[i] ? 100.0 : 0.0);
    }
  }
  std::vector<double> value(n, 0.0);
  std::vector<double> next(n);
  for (int k = 0; k < iterations; ++k) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        double best = -1e300;
        for (Action a : kAllActions) {
          const Pose nb = apply(Pose{r, c}, a);
          double q = 0.0;
          if (nb.row >= 0 && nb.row < height && nb.col >= 0 && nb.col < width) {
            const std::size_t j = static_cast<std::size_t>(nb.row) * width + nb.col;
            q = reward[j] + value[j];
          }
          best = std::max(best, q);
        }
        next[static_cast<std::size_t>(r) * width + c] = best;
      }
    }
    value.swap(next);
  }
  return value;
}

}  // namespace navmem
