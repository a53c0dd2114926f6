#pragma once

#include <span>
#include <vector>

#include "navmem/autodiff.hpp"
#include "navmem/tensor.hpp"

namespace navmem {

// Value-only kernels shared by the differentiable ops below.
namespace kernels {

/// Same-size cross-correlation. `pad` holds one constant per input channel.
/// `bias` may be null.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor* bias, std::span<const double> pad);

}  // namespace kernels

namespace ad {

Var add(Tape& tape, const Var& a, const Var& b);
Var sub(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& a, double factor);
Var sum(Tape& tape, const Var& a);

Var relu(Tape& tape, const Var& a);
Var sigmoid(Tape& tape, const Var& a);
Var tanh(Tape& tape, const Var& a);

/// weight: out x in, x: in, bias: out (optional) -> out.
Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias);

/// input C_in x H x W, kernels C_out x C_in x k x k (odd k), bias C_out or
/// empty; output C_out x H x W.
Var conv2d(Tape& tape, const Var& input, const Var& kernels, const Var& bias, std::span<const double> pad);

struct ChannelMax {
  Var values;             // 1 x H x W
  std::vector<int> argmax;  // H*W, lowest channel on ties
};
ChannelMax channel_max(Tape& tape, const Var& input);

/// Concatenate along axis 0 (channels for CxHxW, elements for vectors).
Var concat(Tape& tape, const std::vector<Var>& parts);
/// Rows [begin, begin+count) along axis 0.
Var slice(Tape& tape, const Var& a, int begin, int count);
Var reshape(Tape& tape, const Var& a, Shape shape);
/// Channel vector of a CxHxW value at one pixel.
Var gather_at(Tape& tape, const Var& input, int row, int col);
/// Single element as a {1} scalar.
Var pick(Tape& tape, const Var& a, int index);

/// -log softmax(logits)[label], stabilized by max subtraction.
Var softmax_cross_entropy(Tape& tape, const Var& logits, int label);
/// (a - target)^2 for a single-element value.
Var squared_error(Tape& tape, const Var& a, double target);

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step. w_x: 4H x in, w_h: 4H x H, bias: 4H, gate rows ordered
/// (input, forget, cell, output).
LstmState lstm_cell(Tape& tape, const Var& x, const LstmState& prev, const Var& w_x, const Var& w_h, const Var& bias);

}  // namespace ad
}  // namespace navmem
