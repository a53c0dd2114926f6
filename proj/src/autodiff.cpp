#include "navmem/autodiff.hpp"

#include <stdexcept>

namespace navmem::ad {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(val().shape(), 0.0);
  return grad;
}

Tensor Var::grad() const {
  if (node_->has_grad()) return node_->grad;
  return Tensor(node_->val().shape(), 0.0);
}

Var Tape::parameter(const Tensor& value) {
  auto node = std::make_shared<Node>();
  node->borrowed = &value;
  node->requires_grad = recording_;
  node->tape = this;
  if (recording_) nodes_.push_back(node);
  return Var(std::move(node));
}

Var Tape::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->tape = this;
  return Var(std::move(node));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->tape = this;
  bool needs = false;
  if (recording_) {
    for (const Var& v : inputs) needs = needs || v.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    nodes_.push_back(node);
  }
  return Var(std::move(node));
}

void Tape::backward(const Var& loss) {
  if (!loss || loss.node().tape != this || !loss.requires_grad()) {
    throw std::invalid_argument("backward: loss is not a differentiable value on this tape");
  }
  if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  std::size_t end = nodes_.size();
  while (end > 0 && nodes_[end - 1].get() != &loss.node()) --end;
  if (end == 0) throw std::invalid_argument("backward: loss not found on tape");

  // Interior gradients are recomputed on each pass; only leaves accumulate.
  for (std::size_t i = 0; i < end; ++i) {
    if (nodes_[i]->backward) nodes_[i]->grad = Tensor();
  }
  loss.node().grad_buffer()[0] += 1.0;
  for (std::size_t i = end; i-- > 0;) {
    Node& n = *nodes_[i];
    if (n.backward && n.has_grad()) n.backward(n);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n->grad = Tensor();
}

}  // namespace navmem::ad
