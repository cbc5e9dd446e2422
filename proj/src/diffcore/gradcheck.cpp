#include "lupiet/diffcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {
namespace {

double finite_or_throw(double v, const char* where) {
  if (!std::isfinite(v)) {
    throw GradientCheckError(std::string("non-finite function value during ") + where);
  }
  return v;
}

std::vector<std::size_t> coordinates(std::size_t n, const GradCheckOptions& opt,
                                     std::size_t tensor) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (opt.max_coordinates_per_tensor == 0 || n <= opt.max_coordinates_per_tensor) return idx;
  Rng rng(derive_seed(opt.seed, tensor));
  rng.shuffle(idx);
  idx.resize(opt.max_coordinates_per_tensor);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Shared driver: `values` are the tensors being perturbed, `eval` evaluates
// the function at their current contents, `analytic` holds reverse-mode
// gradients at the unperturbed point.
GradCheckReport compare(std::span<Tensor* const> values, const std::vector<Tensor>& analytic,
                        const std::function<double()>& eval, const GradCheckOptions& opt) {
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t t = 0; t < values.size(); ++t) {
    Tensor& x = *values[t];
    for (std::size_t i : coordinates(x.numel(), opt, t)) {
      const double orig = x[i];
      x[i] = orig + opt.step;
      const double up = finite_or_throw(eval(), "forward perturbation");
      x[i] = orig - opt.step;
      const double down = finite_or_throw(eval(), "backward perturbation");
      x[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[t][i];
      if (!std::isfinite(a)) throw GradientCheckError("non-finite analytic gradient");
      const double err = gradient_relative_error(a, numeric);
      ++report.coordinates_checked;
      if (report.coordinates_checked == 1 || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "max relative error " << max_relative_error << " over " << coordinates_checked
     << " coordinates (worst: tensor " << worst_tensor << " index " << worst_index
     << ", analytic " << worst_analytic << ", numeric " << worst_numeric << ")";
  return os.str();
}

GradCheckReport check_gradients(const InputFunction& f, std::vector<Tensor> inputs,
                                const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.input(t));
    Var out = f(g, vars);
    finite_or_throw(out.value().item(), "unperturbed evaluation");
    g.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&] {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.constant(t));
    return f(g, vars).value().item();
  };
  std::vector<Tensor*> ptrs;
  for (Tensor& t : inputs) ptrs.push_back(&t);
  return compare(ptrs, analytic, eval, options);
}

GradCheckReport check_gradients(std::span<Parameter* const> params,
                                const std::function<Var(Graph&)>& f,
                                const GradCheckOptions& options) {
  std::vector<Tensor> saved_grads;
  for (Parameter* p : params) {
    saved_grads.push_back(p->grad);
    p->zero_grad();
  }
  std::vector<Tensor> analytic;
  {
    Graph g;
    Var out = f(g);
    finite_or_throw(out.value().item(), "unperturbed evaluation");
    g.backward(out);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic.push_back(params[i]->grad);
    params[i]->grad = saved_grads[i];
  }
  auto eval = [&] {
    Graph g;
    return f(g).value().item();
  };
  std::vector<Tensor*> ptrs;
  for (Parameter* p : params) ptrs.push_back(&p->value);
  return compare(ptrs, analytic, eval, options);
}

}  // namespace lupiet
