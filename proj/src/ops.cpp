#include "navmem/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace navmem {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1>;

struct ConvShape {
  int in_channels;
  int height;
  int width;
  int out_channels;
  int k;
};

ConvShape check_conv(const Tensor& input, const Tensor& kernels, const Tensor* bias, std::span<const double> pad) {
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be CxHxW, got " + shape_string(input.shape()));
  if (kernels.rank() != 4) throw std::invalid_argument("conv2d: kernels must be rank 4");
  const ConvShape s{input.dim(0), input.dim(1), input.dim(2), kernels.dim(0), kernels.dim(2)};
  if (kernels.dim(1) != s.in_channels) {
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kernels.dim(1)) + " input channels, got " +
                                std::to_string(s.in_channels));
  }
  if (kernels.dim(3) != s.k || s.k % 2 == 0) throw std::invalid_argument("conv2d: kernels must be square and odd");
  if (bias && (bias->rank() != 1 || bias->dim(0) != s.out_channels)) throw std::invalid_argument("conv2d: bias shape");
  if (static_cast<int>(pad.size()) != s.in_channels) throw std::invalid_argument("conv2d: need one pad value per channel");
  return s;
}

// Column matrix of shape (C_in*k*k) x (H*W).
Buffer im2col(const Tensor& input, const ConvShape& s, std::span<const double> pad) {
  const int hw = s.height * s.width;
  const int half = s.k / 2;
  Buffer col(static_cast<std::size_t>(s.in_channels) * s.k * s.k * hw);
  for (int ci = 0; ci < s.in_channels; ++ci) {
    const double* src = input.raw() + static_cast<std::size_t>(ci) * hw;
    for (int ki = 0; ki < s.k; ++ki) {
      for (int kj = 0; kj < s.k; ++kj) {
        double* dst = col.data() + static_cast<std::size_t>((ci * s.k + ki) * s.k + kj) * hw;
        const int dy = ki - half;
        const int dx = kj - half;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(s.width, s.width - dx);
        for (int y = 0; y < s.height; ++y) {
          double* row = dst + static_cast<std::size_t>(y) * s.width;
          const int sy = y + dy;
          if (sy < 0 || sy >= s.height) {
            std::fill(row, row + s.width, pad[ci]);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(sy) * s.width + dx;
          for (int x = 0; x < x_lo; ++x) row[x] = pad[ci];
          for (int x = x_lo; x < x_hi; ++x) row[x] = srow[x];
          for (int x = std::max(x_hi, x_lo); x < s.width; ++x) row[x] = pad[ci];
        }
      }
    }
  }
  return col;
}

void col2im_add(const double* dcol, const ConvShape& s, double* dinput) {
  const int hw = s.height * s.width;
  const int half = s.k / 2;
  for (int ci = 0; ci < s.in_channels; ++ci) {
    double* dst = dinput + static_cast<std::size_t>(ci) * hw;
    for (int ki = 0; ki < s.k; ++ki) {
      for (int kj = 0; kj < s.k; ++kj) {
        const double* src = dcol + static_cast<std::size_t>((ci * s.k + ki) * s.k + kj) * hw;
        const int dy = ki - half;
        const int dx = kj - half;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(s.width, s.width - dx);
        for (int y = 0; y < s.height; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= s.height) continue;
          const double* g = src + static_cast<std::size_t>(y) * s.width;
          double* drow = dst + static_cast<std::size_t>(sy) * s.width + dx;
          for (int x = x_lo; x < x_hi; ++x) drow[x] += g[x];
        }
      }
    }
  }
}

Tensor conv_from_columns(const Buffer& col, const Tensor& kernels, const Tensor* bias, const ConvShape& s) {
  const int rows = s.in_channels * s.k * s.k;
  const int hw = s.height * s.width;
  Tensor out({s.out_channels, s.height, s.width});
  Eigen::Map<const RowMat> w(kernels.raw(), s.out_channels, rows);
  Eigen::Map<const RowMat> c(col.data(), rows, hw);
  Eigen::Map<RowMat> o(out.raw(), s.out_channels, hw);
  o.noalias() = w * c;
  if (bias) {
    for (int co = 0; co < s.out_channels; ++co) o.row(co).array() += (*bias)[static_cast<std::size_t>(co)];
  }
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.raw();
  const double* s = src.raw();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += s[i];
}

}  // namespace

namespace kernels {

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor* bias, std::span<const double> pad) {
  const ConvShape s = check_conv(input, kernels, bias, pad);
  return conv_from_columns(im2col(input, s, pad), kernels, bias, s);
}

}  // namespace kernels

namespace ad {

Var add(Tape& tape, const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  return tape.record(std::move(out), {a, b}, [a, b](Node& self) {
    if (a.requires_grad()) accumulate(a.node().grad_buffer(), self.grad);
    if (b.requires_grad()) accumulate(b.node().grad_buffer(), self.grad);
  });
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return tape.record(std::move(out), {a, b}, [a, b](Node& self) {
    if (a.requires_grad()) accumulate(a.node().grad_buffer(), self.grad);
    if (b.requires_grad()) {
      Tensor& g = b.node().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return tape.record(std::move(out), {a, b}, [a, b](Node& self) {
    if (a.requires_grad()) {
      Tensor& g = a.node().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor& g = b.node().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.value()[i];
    }
  });
}

Var scale(Tape& tape, const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Node& self) {
    Tensor& g = a.node().grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var sum(Tape& tape, const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return tape.record(Tensor::scalar(total), {a}, [a](Node& self) {
    Tensor& g = a.node().grad_buffer();
    const double s = self.grad[0];
    for (double& v : g.data()) v += s;
  });
}

Var relu(Tape& tape, const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node().grad_buffer();
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Var sigmoid(Tape& tape, const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return tape.record(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node().grad_buffer();
    const Tensor& y = self.val();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Tape& tape, const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return tape.record(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node().grad_buffer();
    const Tensor& y = self.val();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (1.0 - y[i] * y[i]);
  });
}

Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  const Tensor& w = weight.value();
  if (w.rank() != 2 || x.value().rank() != 1 || w.dim(1) != x.value().dim(0)) {
    throw std::invalid_argument("linear: shape mismatch " + shape_string(w.shape()) + " * " +
                                shape_string(x.value().shape()));
  }
  const int out_dim = w.dim(0);
  const int in_dim = w.dim(1);
  if (bias && (bias.value().rank() != 1 || bias.value().dim(0) != out_dim)) {
    throw std::invalid_argument("linear: bias shape mismatch");
  }
  Tensor out({out_dim});
  Eigen::Map<const RowMat> wm(w.raw(), out_dim, in_dim);
  Eigen::Map<const Vec> xv(x.value().raw(), in_dim);
  Eigen::Map<Vec> ov(out.raw(), out_dim);
  ov.noalias() = wm * xv;
  if (bias) ov += Eigen::Map<const Vec>(bias.value().raw(), out_dim);
  return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias, out_dim, in_dim](Node& self) {
    Eigen::Map<const Vec> gv(self.grad.raw(), out_dim);
    if (weight.requires_grad()) {
      Eigen::Map<RowMat> gw(weight.node().grad_buffer().raw(), out_dim, in_dim);
      gw.noalias() += gv * Eigen::Map<const Vec>(x.value().raw(), in_dim).transpose();
    }
    if (x.requires_grad()) {
      Eigen::Map<Vec> gx(x.node().grad_buffer().raw(), in_dim);
      gx.noalias() += Eigen::Map<const RowMat>(weight.value().raw(), out_dim, in_dim).transpose() * gv;
    }
    if (bias && bias.requires_grad()) Eigen::Map<Vec>(bias.node().grad_buffer().raw(), out_dim) += gv;
  });
}

Var conv2d(Tape& tape, const Var& input, const Var& kernels, const Var& bias, std::span<const double> pad) {
  const Tensor* bias_value = bias ? &bias.value() : nullptr;
  const ConvShape s = check_conv(input.value(), kernels.value(), bias_value, pad);
  auto col = std::make_shared<Buffer>(im2col(input.value(), s, pad));
  Tensor out = conv_from_columns(*col, kernels.value(), bias_value, s);
  return tape.record(std::move(out), {input, kernels, bias}, [input, kernels, bias, col, s](Node& self) {
    const int rows = s.in_channels * s.k * s.k;
    const int hw = s.height * s.width;
    Eigen::Map<const RowMat> go(self.grad.raw(), s.out_channels, hw);
    if (kernels.requires_grad()) {
      Eigen::Map<RowMat> gw(kernels.node().grad_buffer().raw(), s.out_channels, rows);
      gw.noalias() += go * Eigen::Map<const RowMat>(col->data(), rows, hw).transpose();
    }
    if (bias && bias.requires_grad()) {
      Tensor& gb = bias.node().grad_buffer();
      for (int co = 0; co < s.out_channels; ++co) gb[static_cast<std::size_t>(co)] += go.row(co).sum();
    }
    if (input.requires_grad()) {
      RowMat dcol(rows, hw);
      dcol.noalias() = Eigen::Map<const RowMat>(kernels.value().raw(), s.out_channels, rows).transpose() * go;
      col2im_add(dcol.data(), s, input.node().grad_buffer().raw());
    }
  });
}

ChannelMax channel_max(Tape& tape, const Var& input) {
  const Tensor& x = input.value();
  if (x.rank() != 3) throw std::invalid_argument("channel_max: input must be CxHxW");
  const int channels = x.dim(0);
  const int hw = x.dim(1) * x.dim(2);
  Tensor out({1, x.dim(1), x.dim(2)});
  std::vector<int> argmax(static_cast<std::size_t>(hw), 0);
  for (int i = 0; i < hw; ++i) out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
  for (int c = 1; c < channels; ++c) {
    const double* plane = x.raw() + static_cast<std::size_t>(c) * hw;
    for (int i = 0; i < hw; ++i) {
      if (plane[i] > out[static_cast<std::size_t>(i)]) {
        out[static_cast<std::size_t>(i)] = plane[i];
        argmax[static_cast<std::size_t>(i)] = c;
      }
    }
  }
  ChannelMax result;
  result.argmax = argmax;
  auto shared = std::make_shared<std::vector<int>>(std::move(argmax));
  result.values = tape.record(std::move(out), {input}, [input, shared, hw](Node& self) {
    double* g = input.node().grad_buffer().raw();
    for (int i = 0; i < hw; ++i) {
      g[static_cast<std::size_t>((*shared)[static_cast<std::size_t>(i)]) * hw + i] += self.grad[static_cast<std::size_t>(i)];
    }
  });
  return result;
}

Var concat(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts[0].shape();
  Shape tail(shape.begin() + 1, shape.end());
  int rows = 0;
  for (const Var& p : parts) {
    const Shape& ps = p.shape();
    if (Shape(ps.begin() + 1, ps.end()) != tail) throw std::invalid_argument("concat: trailing shapes differ");
    rows += ps[0];
  }
  shape[0] = rows;
  Tensor out(shape);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.value().size();
  }
  return tape.record(std::move(out), parts, [parts](Node& self) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        Tensor& g = p.node().grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var slice(Tape& tape, const Var& a, int begin, int count) {
  const Shape& shape = a.shape();
  if (begin < 0 || count <= 0 || begin + count > shape[0]) throw std::out_of_range("slice: range outside axis 0");
  const std::size_t inner = a.value().size() / static_cast<std::size_t>(shape[0]);
  Shape out_shape = shape;
  out_shape[0] = count;
  const std::size_t offset = static_cast<std::size_t>(begin) * inner;
  Tensor out(out_shape);
  std::copy_n(a.value().raw() + offset, out.size(), out.raw());
  return tape.record(std::move(out), {a}, [a, offset](Node& self) {
    double* g = a.node().grad_buffer().raw() + offset;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Var reshape(Tape& tape, const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return tape.record(std::move(out), {a}, [a](Node& self) {
    double* g = a.node().grad_buffer().raw();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Var gather_at(Tape& tape, const Var& input, int row, int col) {
  const Tensor& x = input.value();
  if (x.rank() != 3) throw std::invalid_argument("gather_at: input must be CxHxW");
  if (row < 0 || row >= x.dim(1) || col < 0 || col >= x.dim(2)) {
    throw std::out_of_range("attention index (" + std::to_string(row) + "," + std::to_string(col) + ") outside " +
                            shape_string(x.shape()));
  }
  const int channels = x.dim(0);
  Tensor out({channels});
  for (int c = 0; c < channels; ++c) out[static_cast<std::size_t>(c)] = x.at(c, row, col);
  return tape.record(std::move(out), {input}, [input, row, col, channels](Node& self) {
    Tensor& g = input.node().grad_buffer();
    for (int c = 0; c < channels; ++c) g.at(c, row, col) += self.grad[static_cast<std::size_t>(c)];
  });
}

Var pick(Tape& tape, const Var& a, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= a.value().size()) throw std::out_of_range("pick: index");
  return tape.record(Tensor::scalar(a.value()[static_cast<std::size_t>(index)]), {a}, [a, index](Node& self) {
    a.node().grad_buffer()[static_cast<std::size_t>(index)] += self.grad[0];
  });
}

Var softmax_cross_entropy(Tape& tape, const Var& logits, int label) {
  const Tensor& z = logits.value();
  if (z.rank() != 1 || label < 0 || label >= z.dim(0)) throw std::invalid_argument("softmax_cross_entropy: bad label");
  const double top = *std::max_element(z.data().begin(), z.data().end());
  double denom = 0.0;
  for (double v : z.data()) denom += std::exp(v - top);
  const double log_denom = std::log(denom);
  const double loss = log_denom - (z[static_cast<std::size_t>(label)] - top);
  return tape.record(Tensor::scalar(loss), {logits}, [logits, label, top, log_denom](Node& self) {
    Tensor& g = logits.node().grad_buffer();
    const Tensor& z = logits.value();
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = std::exp(z[i] - top - log_denom);
      g[i] += s * (p - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
  });
}

Var squared_error(Tape& tape, const Var& a, double target) {
  if (a.value().size() != 1) throw std::invalid_argument("squared_error: expects a single element");
  const double diff = a.value()[0] - target;
  return tape.record(Tensor::scalar(diff * diff), {a}, [a, diff](Node& self) {
    a.node().grad_buffer()[0] += 2.0 * diff * self.grad[0];
  });
}

LstmState lstm_cell(Tape& tape, const Var& x, const LstmState& prev, const Var& w_x, const Var& w_h, const Var& bias) {
  const int hidden = prev.h.shape().at(0);
  if (w_x.shape().at(0) != 4 * hidden || w_h.shape() != Shape{4 * hidden, hidden} || prev.c.shape() != prev.h.shape()) {
    throw std::invalid_argument("lstm_cell: parameter shapes do not match hidden size " + std::to_string(hidden));
  }
  const Var z = add(tape, linear(tape, x, w_x, bias), linear(tape, prev.h, w_h, Var()));
  const Var in_gate = sigmoid(tape, slice(tape, z, 0, hidden));
  const Var forget_gate = sigmoid(tape, slice(tape, z, hidden, hidden));
  const Var candidate = tanh(tape, slice(tape, z, 2 * hidden, hidden));
  const Var out_gate = sigmoid(tape, slice(tape, z, 3 * hidden, hidden));
  const Var c = add(tape, mul(tape, forget_gate, prev.c), mul(tape, in_gate, candidate));
  const Var h = mul(tape, out_gate, tanh(tape, c));
  return {h, c};
}

}  // namespace ad
}  // namespace navmem
