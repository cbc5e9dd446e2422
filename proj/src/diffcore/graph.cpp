#include "lupiet/diffcore/graph.hpp"

#include "lupiet/error.hpp"
#include "lupiet/simd/kernels.hpp"

namespace lupiet {

const Tensor& Var::value() const { return graph_->value(id_); }

const Tensor& Var::grad() const { return graph_->grad(id_); }

Var Graph::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = true;
  return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  Node& n = nodes_.emplace_back();
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  const std::size_t id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  return {this, id};
}

Var Graph::emit(Tensor value, const std::vector<Var>& parents, BackwardFn backward,
                bool force_grad) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  bool needs = force_grad;
  for (const Var& p : parents) {
    n.parents.push_back(p.id());
    needs = needs || nodes_[p.id()].requires_grad;
  }
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.numel() != n.value.numel()) {
    // Never touched by backward: report zeros of the right shape.
    const_cast<Node&>(n).grad = Tensor::zeros(n.value.shape());
  }
  return n.grad;
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.numel() != n.value.numel()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Graph::backward(Var root, double seed) {
  if (root.id() >= nodes_.size()) throw DimensionError("backward root is not on this graph");
  if (value(root.id()).numel() != 1) {
    throw DimensionError("backward root must be a single value, got " +
                         shape_string(value(root.id()).shape()));
  }
  if (backward_done_) throw Error("backward called twice on the same graph");
  backward_done_ = true;
  grad_of(root.id())[0] += seed;
  const auto& k = simd::active();
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.numel() != n.value.numel()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) k.axpy(1.0, n.grad.data().data(), n.param->grad.data().data(),
                                   n.grad.numel());
  }
}

}  // namespace lupiet
