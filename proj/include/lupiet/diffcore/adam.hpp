#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lupiet/diffcore/graph.hpp"
#include "lupiet/diffcore/tensor.hpp"

namespace lupiet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style): p -= lr * weight_decay * p alongside the Adam step.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// One bias-corrected Adam update of `params` using `grads`. Moment buffers
// are created on the first call; later calls must pass identically shaped
// tensors in the same order.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);

// Convenience over Parameter objects (value updated from grad).
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace lupiet
