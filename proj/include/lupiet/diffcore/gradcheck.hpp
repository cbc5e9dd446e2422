#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lupiet/diffcore/graph.hpp"

namespace lupiet {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-3;
  // 0 checks every coordinate; otherwise a deterministic random subset per tensor.
  std::size_t max_coordinates_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  double tolerance = 0.0;

  bool passed() const noexcept { return max_relative_error < tolerance; }
  std::string summary() const;
};

// |a - n| / max(1, |a|, |n|)
double gradient_relative_error(double analytic, double numeric);

// Builds a scalar from graph inputs bound to `inputs`.
using InputFunction = std::function<Var(Graph&, std::span<const Var>)>;

// Reverse-mode gradient of `f` at `inputs` against central differences.
// Throws GradientCheckError if f is not finite anywhere it is evaluated.
GradCheckReport check_gradients(const InputFunction& f, std::vector<Tensor> inputs,
                                const GradCheckOptions& options = {});

// Same check with respect to Parameter objects that `f` binds itself
// (models). Parameter values are restored before returning.
GradCheckReport check_gradients(std::span<Parameter* const> params,
                                const std::function<Var(Graph&)>& f,
                                const GradCheckOptions& options = {});

}  // namespace lupiet
