#include "navmem/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace navmem {

namespace {
constexpr double kSmallestNormal = std::numeric_limits<double>::min();
}  // namespace

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("adam_step: gradient for unknown parameter " + name);
    require_same_shape(it->second, g, "adam_step");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape(), 0.0);
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    require_same_shape(m, p, "adam_step moments");
    double* pp = p.raw();
    double* mp = m.raw();
    double* vp = v.raw();
    const double* gp = g.raw();
    const double lr1 = c.learning_rate / correction1;
    const double inv2 = 1.0 / correction2;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double mi = c.beta1 * mp[i] + (1.0 - c.beta1) * gp[i];
      double vi = c.beta2 * vp[i] + (1.0 - c.beta2) * gp[i] * gp[i];
      // A decaying moment otherwise parks on the smallest subnormal forever,
      // and subnormal arithmetic is an order of magnitude slower.
      mi = std::abs(mi) < kSmallestNormal ? 0.0 : mi;
      vi = vi < kSmallestNormal ? 0.0 : vi;
      mp[i] = mi;
      vp[i] = vi;
      pp[i] -= lr1 * mi / (std::sqrt(vi * inv2) + c.epsilon);
    }
  }
}

double global_norm(const NamedTensors& tensors) {
  double sq = 0.0;
  for (const auto& [name, t] : tensors) {
    for (double v : t.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_by_global_norm(NamedTensors& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) scale_all(grads, max_norm / norm);
  return norm;
}

void accumulate(NamedTensors& dst, const NamedTensors& src) {
  for (const auto& [name, t] : src) {
    auto [it, inserted] = dst.try_emplace(name, t);
    if (inserted) continue;
    require_same_shape(it->second, t, "accumulate");
    for (std::size_t i = 0; i < t.size(); ++i) it->second[i] += t[i];
  }
}

void scale_all(NamedTensors& tensors, double factor) {
  for (auto& [name, t] : tensors) {
    for (double& v : t.data()) v *= factor;
  }
}

}  // namespace navmem
