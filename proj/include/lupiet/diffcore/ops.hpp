#pragma once

// Differentiable operations on Graph nodes, plus value-level versions of the
// probability functions for code that does not need gradients.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lupiet/diffcore/graph.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {

// --- linear algebra -------------------------------------------------------

// [m x k] * [k x n] -> [m x n]
Var matmul(Var a, Var b);
Var add(Var a, Var b);
// Adds a row vector (numel == a.cols()) to every row of a.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var sum_squares(Var a);
Var reshape(Var a, Shape shape);

// --- elementwise nonlinearities ------------------------------------------

Var tanh(Var a);
Var sigmoid(Var a);

// --- structural ------------------------------------------------------------

// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// Horizontal concatenation of matrices with equal row counts.
Var concat_cols(std::span<const Var> parts);
// Appends zero rows until a has at least `rows` rows.
Var pad_rows(Var a, std::size_t rows);
// Column means over rows: [n x d] -> [1 x d].
Var mean_rows(Var a);
// Inverted dropout; identity when rate == 0.
Var dropout(Var a, double rate, Rng& rng);

// Gathers rows of `table` -> [ids.size() x d]. Gradients are scattered into
// table.grad directly, so the table is never copied onto the tape.
Var embedding(Graph& g, Parameter& table, std::span<const std::int32_t> ids);

// --- sequence ops ------------------------------------------------------------

// Same-length sliding window: row i of the result is rows
// [i - (width-1)/2, i - (width-1)/2 + width) of x, flattened, with zero rows
// outside the sequence. [len x d] -> [len x width*d].
Var unfold_time(Var x, std::size_t width);

// Same-length 1-D convolution over time. weight is [width*d x F] (tap-major),
// bias has F elements. Output [len x F], pre-activation.
Var conv1d(Var x, Var weight, Var bias, std::size_t width);

struct ConvBank {
  Var weight;    // [width*d x F]
  Var bias;      // F
  Var residual;  // [d x F] width-matching projection of the input
  std::size_t width = 1;
};

// One output per bank: tanh(conv1d(x) + x * residual). Inputs shorter than the
// widest bank are zero-padded to that width first.
std::vector<Var> conv1d_multi(Var x, std::span<const ConvBank> banks);

// Per-column maximum over rows: [len x F] -> [1 x F]. Gradient goes to the
// first maximal row.
Var max_pool_time(Var x);

struct LstmWeights {
  Var input;    // [d x 4H]
  Var hidden;   // [H x 4H]
  Var bias;     // 4H, gate order: input, forget, candidate, output
};

struct LstmState {
  Var h;  // [1 x H]
  Var c;  // [1 x H]
};

LstmState lstm_step(Var x, const LstmState& state, const LstmWeights& w);

// --- probabilities and losses ---------------------------------------------

// softmax(logits / tau) over all elements; same shape as logits.
Var softmax_with_temperature(Var logits, double tau);
// -log softmax(logits)[label], as a {1} scalar.
Var cross_entropy(Var logits, std::size_t label);
// sum_i p_i ln(p_i / q_i) with 0 ln(0/q) = 0.
Var kl_divergence(Var p, Var q);

namespace pure {

std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau);
double log_sum_exp(std::span<const double> values);
double cross_entropy(std::span<const double> logits, std::size_t label);
double kl_divergence(std::span<const double> p, std::span<const double> q);
// Index of the first maximal element.
std::size_t argmax(std::span<const double> values);

}  // namespace pure

}  // namespace lupiet
