#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lupiet/diffcore/tensor.hpp"

namespace lupiet {

// A trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Handle to a node on a Graph's tape. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  // Gradient after Graph::backward; zeros if nothing flowed here.
  const Tensor& grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so creation
// order is a topological order and backward is a single reverse sweep.
// A Graph is single-use and confined to one thread.
class Graph {
 public:
  // Receives the node's output gradient; adds into parents via grad_of().
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Non-differentiable input.
  Var constant(Tensor value);
  // Differentiable input whose gradient is read back through Var::grad().
  Var input(Tensor value);
  // Trainable parameter; backward adds the node gradient into p.grad.
  // Repeated calls with the same Parameter return the same node.
  Var param(Parameter& p);

  // Used by op implementations. The node requires a gradient iff any parent
  // does, or `force_grad` is set (ops that write straight into a Parameter).
  Var emit(Tensor value, const std::vector<Var>& parents, BackwardFn backward,
           bool force_grad = false);

  // Seeds d(root) = seed (root must be a single element) and sweeps the tape.
  void backward(Var root, double seed = 1.0);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;
  // Gradient buffer of a node, allocated on first touch.
  Tensor& grad_of(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  // deque: references to existing nodes stay valid while ops append.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace lupiet
