#include "lupiet/diffcore/adam.hpp"

#include <cmath>
#include <string>

#include "lupiet/error.hpp"
#include "lupiet/simd/kernels.hpp"

namespace lupiet {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw DimensionError("adam_step: tensor " + std::to_string(i) + " param " +
                           shape_string(params[i]->shape()) + ", grad " +
                           shape_string(grads[i]->shape()) + ", state " +
                           shape_string(state.first_moment[i].shape()));
    }
  }

  state.step += 1;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const simd::AdamUpdate h{
      c.lr,           c.beta1, c.beta2, c.epsilon, c.weight_decay, 1.0 - std::pow(c.beta1, t),
      1.0 - std::pow(c.beta2, t),
  };
  const auto& k = simd::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    k.adam_update(h, params[i]->data().data(), grads[i]->data().data(),
                  state.first_moment[i].data().data(), state.second_moment[i].data().data(),
                  params[i]->numel());
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (Parameter* p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(values, grads, state);
}

}  // namespace lupiet
