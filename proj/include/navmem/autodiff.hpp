#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "navmem/tensor.hpp"

namespace navmem::ad {

class Tape;

struct Node {
  Tensor value;
  const Tensor* borrowed = nullptr;  // parameter leaves point at caller-owned storage
  Tensor grad;                       // allocated on first accumulation
  bool requires_grad = false;
  const Tape* tape = nullptr;
  std::function<void(Node&)> backward;  // pushes this->grad into the inputs' grads

  const Tensor& val() const { return borrowed ? *borrowed : value; }
  bool has_grad() const { return !grad.empty(); }
  /// Gradient buffer, zero-initialized to the value's shape on first use.
  Tensor& grad_buffer();
};

/// Handle to a value on a tape.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  explicit operator bool() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->val(); }
  const Shape& shape() const { return node_->val().shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Accumulated gradient; zeros when nothing reached this value.
  Tensor grad() const;
  Node& node() const { return *node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Append-only record of differentiable operations in execution order.
/// With recording off, operations compute values only and intermediate
/// results are released as soon as their handles go away.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  /// Trainable leaf that borrows `value`; the tensor must outlive the tape.
  Var parameter(const Tensor& value);
  Var constant(Tensor value);

  Var record(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward);
  Var record(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> backward);

  /// Reverse sweep from a scalar loss; leaf gradients add onto existing ones.
  void backward(const Var& loss);
  void zero_grad();
  std::size_t size() const { return nodes_.size(); }

 private:
  bool recording_;
  std::vector<std::shared_ptr<Node>> nodes_;
};

}  // namespace navmem::ad
