#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "radnas/tensor.hpp"

namespace radnas {

// A node of the reverse-mode tape. Nodes are created by the ops in ops.hpp;
// when gradient recording is disabled they carry only a value.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  // Returns the gradient buffer, allocating zeros on first use.
  Tensor& grad_buffer();
  const Shape& shape() const { return value.shape(); }
};

using Var = std::shared_ptr<Node>;

bool grad_enabled();

// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor value);
// Leaf that accumulates its gradient in Node::grad.
Var leaf(Tensor value);

// Builds a result node; parents and the backward closure are recorded only if
// grad mode is on and some parent requires a gradient.
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn);

// Runs reverse accumulation from a scalar root (seed gradient 1).
void backward(const Var& root);

// Trainable tensor. `touched` tracks the leading block that received a
// gradient since the last optimizer step; only that block is updated.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
  Shape touched{0, 0, 0, 0};
  bool decay = true;

  Parameter() = default;
  Parameter(std::string name, Shape shape, bool decay = true);

  void zero_grad();
  std::size_t numel() const { return value.size(); }
};

// Leaf view of the leading `extent` block of a parameter. Backward adds the
// slice gradient into the matching block of Parameter::grad.
Var use_parameter(Parameter& p, const Shape& extent);
Var use_parameter(Parameter& p);

}  // namespace radnas
