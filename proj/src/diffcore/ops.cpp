#include "lupiet/diffcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lupiet/error.hpp"
#include "lupiet/simd/kernels.hpp"

namespace lupiet {
namespace {

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
}

void require_matrix(Var a, const char* op) {
  if (a.shape().size() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(a.shape()));
  }
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("temperature must be positive and finite, got " + std::to_string(tau));
  }
}

void check_distribution(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParameterError(std::string(name) + " is not a probability distribution");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ParameterError(std::string(name) + " sums to " + std::to_string(total) + ", not 1");
  }
}

}  // namespace

// --- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  simd::active().gemm_nn(m, n, k, a.value().data().data(), b.value().data().data(),
                         out.data().data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().emit(std::move(out), {a, b}, [=](Graph& g, const Tensor& dout) {
    const auto& kern = simd::active();
    if (g.requires_grad(ia)) {
      kern.gemm_nt(m, k, n, dout.data().data(), g.value(ib).data().data(),
                   g.grad_of(ia).data().data());
    }
    if (g.requires_grad(ib)) {
      kern.gemm_tn(k, n, m, g.value(ia).data().data(), dout.data().data(),
                   g.grad_of(ib).data().data());
    }
  });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("add shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out = a.value();
  const auto& bv = b.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().emit(std::move(out), {a, b}, [=](Graph& g, const Tensor& dout) {
    for (std::size_t id : {ia, ib}) {
      if (!g.requires_grad(id)) continue;
      Tensor& d = g.grad_of(id);
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i];
    }
  });
}

Var add_row(Var a, Var row) {
  require_same_graph(a, row);
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (row.value().numel() != c) {
    throw DimensionError("add_row: row of " + shape_string(row.shape()) +
                         " does not broadcast over " + shape_string(a.shape()));
  }
  Tensor out = a.value();
  const auto& rv = row.value().values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  const std::size_t ia = a.id(), ir = row.id();
  return a.graph().emit(std::move(out), {a, row}, [=](Graph& g, const Tensor& dout) {
    if (g.requires_grad(ia)) {
      Tensor& d = g.grad_of(ia);
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i];
    }
    if (g.requires_grad(ir)) {
      Tensor& d = g.grad_of(ir);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += dout[i * c + j];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("mul shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out = a.value();
  const auto& bv = b.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().emit(std::move(out), {a, b}, [=](Graph& g, const Tensor& dout) {
    if (g.requires_grad(ia)) {
      Tensor& d = g.grad_of(ia);
      const Tensor& other = g.value(ib);
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i] * other[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& d = g.grad_of(ib);
      const Tensor& other = g.value(ia);
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i] * other[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += factor * dout[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.graph().emit(Tensor::scalar(s), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (double& v : d.values()) v += dout[0];
  });
}

Var sum_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  const std::size_t ia = a.id();
  return a.graph().emit(Tensor::scalar(s), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    const Tensor& x = g.value(ia);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += 2.0 * x[i] * dout[0];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value();
  out.reshape(std::move(shape));
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i];
  });
}

// --- elementwise nonlinearities ------------------------------------------

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id();
  Tensor t = out;
  return a.graph().emit(std::move(out), {a}, [=, t = std::move(t)](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i] * (1.0 - t[i] * t[i]);
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t ia = a.id();
  Tensor s = out;
  return a.graph().emit(std::move(out), {a}, [=, s = std::move(s)](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i] * s[i] * (1.0 - s[i]);
  });
}

// --- structural ------------------------------------------------------------

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (begin > end || end > c) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.value()[i * c + begin + j];
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) d[i * c + begin + j] += dout[i * w + j];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t r = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    require_same_graph(parts[0], p);
    if (p.value().rows() != r) {
      throw DimensionError("concat_cols row mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = p.value()[i * w + j];
    off += w;
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return parts[0].graph().emit(std::move(out), parents, [=](Graph& g, const Tensor& dout) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (g.requires_grad(ids[k])) {
        Tensor& d = g.grad_of(ids[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) d[i * w + j] += dout[i * total + o + j];
      }
      o += w;
    }
  });
}

Var pad_rows(Var a, std::size_t rows) {
  require_matrix(a, "pad_rows");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (r >= rows) return a;
  Tensor out({rows, c});
  std::copy(a.value().values().begin(), a.value().values().end(), out.values().begin());
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < r * c; ++i) d[i] += dout[i];
  });
}

Var mean_rows(Var a) {
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (r == 0) throw DegenerateInputError("mean_rows of an empty matrix");
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += a.value()[i * c + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (double& v : out.values()) v *= inv;
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += dout[j] * inv;
  });
}

Var dropout(Var a, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(a.shape());
  for (double& m : mask.values()) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id();
  return a.graph().emit(std::move(out), {a},
                        [=, mask = std::move(mask)](Graph& g, const Tensor& dout) {
                          Tensor& d = g.grad_of(ia);
                          for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dout[i] * mask[i];
                        });
}

Var embedding(Graph& g, Parameter& table, std::span<const std::int32_t> ids) {
  const std::size_t vocab = table.value.rows(), d = table.value.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw Error("token index " + std::to_string(ids[i]) + " outside embedding table of " +
                  std::to_string(vocab) + " rows");
    }
    const double* src = table.value.data().data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data().data() + i * d);
  }
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  Parameter* target = &table;
  return g.emit(
      std::move(out), {},
      [=, idx = std::move(idx)](Graph&, const Tensor& dout) {
        const auto& k = simd::active();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          k.axpy(1.0, dout.data().data() + i * d,
                 target->grad.data().data() + static_cast<std::size_t>(idx[i]) * d, d);
        }
      },
      /*force_grad=*/true);
}

// --- sequence ops ------------------------------------------------------------

Var unfold_time(Var x, std::size_t width) {
  require_matrix(x, "unfold_time");
  if (width == 0) throw ParameterError("filter width must be positive");
  const std::size_t len = x.shape()[0], d = x.shape()[1];
  if (len == 0) throw DegenerateInputError("unfold_time on an empty sequence");
  const std::size_t left = (width - 1) / 2;
  const std::size_t wd = width * d;
  Tensor out({len, wd});
  const double* src = x.value().data().data();
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(left);
      if (t < 0 || t >= static_cast<std::ptrdiff_t>(len)) continue;
      std::copy(src + t * d, src + (t + 1) * d, out.data().data() + i * wd + j * d);
    }
  }
  const std::size_t ix = x.id();
  return x.graph().emit(std::move(out), {x}, [=](Graph& g, const Tensor& dout) {
    Tensor& dx = g.grad_of(ix);
    const auto& k = simd::active();
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const std::ptrdiff_t t =
            static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(left);
        if (t < 0 || t >= static_cast<std::ptrdiff_t>(len)) continue;
        k.axpy(1.0, dout.data().data() + i * wd + j * d, dx.data().data() + t * d, d);
      }
    }
  });
}

Var conv1d(Var x, Var weight, Var bias, std::size_t width) {
  require_matrix(x, "conv1d");
  require_matrix(weight, "conv1d");
  const std::size_t d = x.shape()[1];
  if (weight.shape()[0] != width * d) {
    throw DimensionError("conv1d weight " + shape_string(weight.shape()) + " does not match width " +
                         std::to_string(width) + " over input " + shape_string(x.shape()));
  }
  return add_row(matmul(unfold_time(x, width), weight), bias);
}

std::vector<Var> conv1d_multi(Var x, std::span<const ConvBank> banks) {
  require_matrix(x, "conv1d_multi");
  if (x.shape()[0] == 0) throw DegenerateInputError("conv1d_multi on an empty sequence");
  std::size_t widest = 0;
  for (const ConvBank& b : banks) widest = std::max(widest, b.width);
  Var input = pad_rows(x, widest);
  std::vector<Var> outs;
  outs.reserve(banks.size());
  for (const ConvBank& b : banks) {
    Var conv = conv1d(input, b.weight, b.bias, b.width);
    Var skip = matmul(input, b.residual);
    outs.push_back(tanh(add(conv, skip)));
  }
  return outs;
}

Var max_pool_time(Var x) {
  const std::size_t len = x.value().rows(), f = x.value().cols();
  if (len == 0 || x.value().numel() == 0) {
    throw DegenerateInputError("max_pool_time on an empty sequence");
  }
  Tensor out({1, f});
  std::vector<std::size_t> arg(f, 0);
  const Tensor& v = x.value();
  for (std::size_t j = 0; j < f; ++j) {
    double best = v[j];
    for (std::size_t i = 1; i < len; ++i) {
      if (v[i * f + j] > best) {
        best = v[i * f + j];
        arg[j] = i;
      }
    }
    out[j] = best;
  }
  const std::size_t ix = x.id();
  return x.graph().emit(std::move(out), {x},
                        [=, arg = std::move(arg)](Graph& g, const Tensor& dout) {
                          Tensor& d = g.grad_of(ix);
                          for (std::size_t j = 0; j < f; ++j) d[arg[j] * f + j] += dout[j];
                        });
}

LstmState lstm_step(Var x, const LstmState& state, const LstmWeights& w) {
  require_matrix(w.input, "lstm_step");
  require_matrix(w.hidden, "lstm_step");
  const std::size_t hidden = w.hidden.shape()[0];
  const std::size_t gates = 4 * hidden;
  if (w.hidden.shape()[1] != gates || w.input.shape()[1] != gates ||
      w.bias.value().numel() != gates) {
    throw DimensionError("lstm weights inconsistent: input " + shape_string(w.input.shape()) +
                         ", hidden " + shape_string(w.hidden.shape()) + ", bias " +
                         shape_string(w.bias.shape()));
  }
  if (x.value().numel() != w.input.shape()[0] || state.h.value().numel() != hidden ||
      state.c.value().numel() != hidden) {
    throw DimensionError("lstm state/input " + shape_string(x.shape()) + ", " +
                         shape_string(state.h.shape()) + ", " + shape_string(state.c.shape()) +
                         " inconsistent with hidden size " + std::to_string(hidden));
  }
  Var xr = x.shape().size() == 2 ? x : reshape(x, {1, x.value().numel()});
  Var z = add_row(add(matmul(xr, w.input), matmul(state.h, w.hidden)), w.bias);
  Var in_gate = sigmoid(slice_cols(z, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(z, hidden, 2 * hidden));
  Var candidate = tanh(slice_cols(z, 2 * hidden, 3 * hidden));
  Var out_gate = sigmoid(slice_cols(z, 3 * hidden, gates));
  Var c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

// --- probabilities and losses ---------------------------------------------

Var softmax_with_temperature(Var logits, double tau) {
  const std::vector<double> p = pure::softmax_with_temperature(logits.value().data(), tau);
  Tensor out(logits.shape(), p);
  const std::size_t il = logits.id();
  return logits.graph().emit(std::move(out), {logits}, [=](Graph& g, const Tensor& dout) {
    double dotp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dotp += dout[i] * p[i];
    Tensor& d = g.grad_of(il);
    for (std::size_t i = 0; i < p.size(); ++i) d[i] += p[i] * (dout[i] - dotp) / tau;
  });
}

Var cross_entropy(Var logits, std::size_t label) {
  const auto z = logits.value().data();
  const double loss = pure::cross_entropy(z, label);
  const std::vector<double> p = pure::softmax_with_temperature(z, 1.0);
  const std::size_t il = logits.id();
  return logits.graph().emit(Tensor::scalar(loss), {logits}, [=](Graph& g, const Tensor& dout) {
    Tensor& d = g.grad_of(il);
    for (std::size_t i = 0; i < p.size(); ++i) {
      d[i] += dout[0] * (p[i] - (i == label ? 1.0 : 0.0));
    }
  });
}

Var kl_divergence(Var p, Var q) {
  require_same_graph(p, q);
  const double value = pure::kl_divergence(p.value().data(), q.value().data());
  const std::size_t ip = p.id(), iq = q.id();
  return p.graph().emit(Tensor::scalar(value), {p, q}, [=](Graph& g, const Tensor& dout) {
    const Tensor& pv = g.value(ip);
    const Tensor& qv = g.value(iq);
    if (g.requires_grad(ip)) {
      Tensor& d = g.grad_of(ip);
      for (std::size_t i = 0; i < pv.numel(); ++i) {
        if (pv[i] > 0.0) d[i] += dout[0] * (std::log(pv[i] / qv[i]) + 1.0);
      }
    }
    if (g.requires_grad(iq)) {
      Tensor& d = g.grad_of(iq);
      for (std::size_t i = 0; i < qv.numel(); ++i) d[i] -= dout[0] * pv[i] / qv[i];
    }
  });
}

namespace pure {

std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau) {
  check_tau(tau);
  if (logits.size() < 2) {
    throw DimensionError("softmax needs at least 2 classes, got " + std::to_string(logits.size()));
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - top) / tau);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(v - top);
  return top + std::log(s);
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (logits.size() < 2) {
    throw DimensionError("cross_entropy needs at least 2 classes, got " +
                         std::to_string(logits.size()));
  }
  if (label >= logits.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  return log_sum_exp(logits) - logits[label];
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DimensionError("kl_divergence size mismatch: " + std::to_string(p.size()) + " vs " +
                         std::to_string(q.size()));
  }
  check_distribution(p, "p");
  check_distribution(q, "q");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw DivergenceUndefinedError("KL undefined: q[" + std::to_string(i) +
                                     "] == 0 where p > 0");
    }
    s += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value when p ~= q.
  return std::max(s, 0.0);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                  values.begin());
}

}  // namespace pure

}  // namespace lupiet
