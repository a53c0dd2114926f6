#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "navmem/tensor.hpp"

namespace navmem {

/// Parameter or gradient tensors keyed by path, iterated in name order.
using NamedTensors = std::map<std::string, Tensor>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  NamedTensors first_moment;
  NamedTensors second_moment;
  std::int64_t step = 0;
};

/// Bias-corrected Adam. Parameters without a gradient entry are left alone.
void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state);

double global_norm(const NamedTensors& tensors);
/// Rescales so the global norm is at most max_norm; returns the norm before clipping.
double clip_by_global_norm(NamedTensors& grads, double max_norm);

/// dst += src, entry by entry (shapes must match; missing dst entries are created).
void accumulate(NamedTensors& dst, const NamedTensors& src);
void scale_all(NamedTensors& tensors, double factor);

}  // namespace navmem
