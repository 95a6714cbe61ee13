#include "radnas/autograd.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace radnas {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.size() != 0) grad = Tensor(value.shape());
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled &&
      std::any_of(parents.begin(), parents.end(),
                  [](const Var& p) { return p && p->requires_grad; })) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

void backward(const Var& root) {
  if (root->value.size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got " +
                                root->value.shape().str());
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

Parameter::Parameter(std::string param_name, Shape shape, bool decays)
    : name(std::move(param_name)),
      value(shape),
      grad(shape),
      velocity(shape),
      decay(decays) {}

void Parameter::zero_grad() {
  grad.fill(0.0);
  touched = Shape{0, 0, 0, 0};
}

Var use_parameter(Parameter& p, const Shape& extent) {
  if (!p.value.shape().contains(extent)) {
    throw std::invalid_argument("parameter " + p.name + ": slice " +
                                extent.str() + " exceeds " +
                                p.value.shape().str());
  }
  auto node = std::make_shared<Node>();
  node->value = p.value.prefix(extent);
  if (g_grad_enabled) {
    node->requires_grad = true;
    Parameter* target = &p;
    node->backward_fn = [target](Node& self) {
      if (target->grad.empty()) target->grad = Tensor(target->value.shape());
      target->grad.add_prefix(self.grad);
      const Shape& s = self.value.shape();
      Shape& t = target->touched;
      t = Shape{std::max(t.n, s.n), std::max(t.c, s.c), std::max(t.h, s.h),
                std::max(t.w, s.w)};
    };
  }
  return node;
}

Var use_parameter(Parameter& p) { return use_parameter(p, p.value.shape()); }

}  // namespace radnas
