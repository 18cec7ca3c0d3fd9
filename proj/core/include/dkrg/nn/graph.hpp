#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dkrg/nn/array4.hpp"

namespace dkrg::nn {

enum class Mode { kTrain, kEval };

/// Learnable tensor (or non-learnable buffer such as batch-norm running
/// statistics) with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Array4<T> value;
  Array4<T> grad;
  bool trainable = true;

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Array4<T>(value.dims());
    grad.fill(T(0));
  }
};

/// Handle to a node recorded on a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Ops append nodes in execution order; backward() walks
/// them in reverse and calls each node's backward closure with the node's
/// accumulated output gradient.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Array4<T>& out_grad)>;

  Var constant(Array4<T> value) { return push(std::move(value), false, {}, nullptr); }
  Var variable(Array4<T> value) { return push(std::move(value), true, {}, nullptr); }

  /// Leaf bound to `p`; backward() adds this node's gradient into p.grad.
  Var parameter(Parameter<T>& p) {
    return push(p.value, p.trainable, {}, &p);
  }

  /// Records an op output. `backward` is dropped when no parent needs a
  /// gradient.
  Var record(Array4<T> value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || (p.valid() && nodes_[p.id].requires_grad);
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{}, nullptr);
  }

  const Array4<T>& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }

  /// Gradient of the last backward() target with respect to `v` (zeros if
  /// nothing flowed into it).
  const Array4<T>& grad(Var v) {
    Node& node = nodes_.at(static_cast<std::size_t>(v.id));
    ensure_grad(node);
    return node.grad;
  }

  /// Mutable gradient accumulator for op implementations.
  Array4<T>& grad_buffer(Var v) {
    Node& node = nodes_.at(static_cast<std::size_t>(v.id));
    ensure_grad(node);
    return node.grad;
  }

  /// `output` must hold a single element; its gradient is seeded with one.
  void backward(Var output) {
    Node& out = nodes_.at(static_cast<std::size_t>(output.id));
    if (out.value.size() != 1) {
      throw std::invalid_argument("Graph::backward: output must be a scalar");
    }
    ensure_grad(out);
    out.grad[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || node.grad.empty()) continue;
      // Closures only touch parents' gradients, so `node` stays valid.
      if (node.backward) node.backward(*this, node.grad);
      if (node.param != nullptr) {
        Parameter<T>& p = *node.param;
        if (!p.grad.same_shape(p.value)) p.zero_grad();
        for (std::size_t k = 0; k < node.grad.size(); ++k) p.grad[k] += node.grad[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Array4<T> value;
    Array4<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var push(Array4<T> value, bool requires_grad, BackwardFn backward, Parameter<T>* param) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward = std::move(backward);
    node.param = param;
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  static void ensure_grad(Node& node) {
    if (node.grad.empty() && !node.value.empty()) node.grad = Array4<T>(node.value.dims());
  }

  std::vector<Node> nodes_;
};

}  // namespace dkrg::nn
