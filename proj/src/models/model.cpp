#include "lupiet/models/model.hpp"

#include <algorithm>
#include <cmath>

#include "lupiet/diffcore/ops.hpp"
#include "lupiet/error.hpp"

namespace lupiet {
namespace {

std::string bank_name(std::size_t i, const char* part) {
  return "bank" + std::to_string(i) + "." + part;
}

Tensor uniform_init(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in,
                    std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({rows, cols});
  for (double& v : t.values()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  return a == Architecture::kWord ? "word" : "doc";
}

std::optional<Architecture> parse_architecture(std::string_view s) {
  if (s == "word") return Architecture::kWord;
  if (s == "doc") return Architecture::kDoc;
  return std::nullopt;
}

void validate(const ModelConfig& c) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ParameterError(std::string("model.") + name + " must be positive");
  };
  positive(c.vocab_size, "vocab_size");
  positive(c.embed_dim, "embed_dim");
  if (c.num_classes < 2) throw ParameterError("model.num_classes must be at least 2");
  if (c.architecture == Architecture::kWord) {
    if (c.filter_widths.empty()) throw ParameterError("model.filter_widths must not be empty");
    for (std::size_t w : c.filter_widths) positive(w, "filter_widths");
    positive(c.filters, "filters");
  } else {
    positive(c.encoder_dim, "encoder_dim");
    positive(c.hidden, "hidden");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw ParameterError("model.dropout must be in [0, 1)");
  }
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  std::size_t n = c.vocab_size * c.embed_dim;
  if (c.architecture == Architecture::kWord) {
    for (std::size_t w : c.filter_widths) {
      n += w * c.embed_dim * c.filters + c.filters + c.embed_dim * c.filters;
    }
    n += c.filter_widths.size() * c.filters * c.num_classes + c.num_classes;
  } else {
    n += c.embed_dim * c.encoder_dim + c.encoder_dim;
    n += c.encoder_dim * 4 * c.hidden + c.hidden * 4 * c.hidden + 4 * c.hidden;
    n += c.hidden * c.num_classes + c.num_classes;
  }
  return n;
}

// --- ModelParams ------------------------------------------------------------

Parameter& ModelParams::add(std::string name, Tensor value) {
  if (contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
  params_.emplace_back(std::move(name), std::move(value));
  return params_.back();
}

Parameter& ModelParams::get(std::string_view name) {
  for (Parameter& p : params_)
    if (p.name == name) return p;
  throw ParameterError("no parameter named '" + std::string(name) + "'");
}

const Parameter& ModelParams::get(std::string_view name) const {
  return const_cast<ModelParams*>(this)->get(name);
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

bool ModelParams::all_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Parameter& p) { return p.value.all_finite(); });
}

bool ModelParams::same_values(const ModelParams& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (!(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

// --- Model --------------------------------------------------------------------

Model::Model(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  validate(config_);
}

Model Model::init(const ModelConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(derive_seed(seed, streams::kInit));
  ModelParams p(c.architecture, seed);
  const std::size_t d = c.embed_dim, k = c.num_classes;
  p.add("embedding", uniform_init(rng, c.vocab_size, d, c.vocab_size, d));
  if (c.architecture == Architecture::kWord) {
    for (std::size_t i = 0; i < c.filter_widths.size(); ++i) {
      const std::size_t w = c.filter_widths[i];
      p.add(bank_name(i, "weight"), uniform_init(rng, w * d, c.filters, w * d, c.filters));
      p.add(bank_name(i, "bias"), Tensor({1, c.filters}));
      p.add(bank_name(i, "residual"), uniform_init(rng, d, c.filters, d, c.filters));
    }
    const std::size_t pooled = c.filter_widths.size() * c.filters;
    p.add("head.weight", uniform_init(rng, pooled, k, pooled, k));
    p.add("head.bias", Tensor({1, k}));
  } else {
    const std::size_t e = c.encoder_dim, h = c.hidden;
    p.add("encoder.weight", uniform_init(rng, d, e, d, e));
    p.add("encoder.bias", Tensor({1, e}));
    p.add("lstm.input", uniform_init(rng, e, 4 * h, e, 4 * h));
    p.add("lstm.hidden", uniform_init(rng, h, 4 * h, h, 4 * h));
    Tensor bias({1, 4 * h});
    for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;
    p.add("lstm.bias", std::move(bias));
    p.add("head.weight", uniform_init(rng, h, k, h, k));
    p.add("head.bias", Tensor({1, k}));
  }
  return Model(c, std::move(p));
}

Var Model::forward(Graph& g, const EncodedView& view, Mode mode, Rng* dropout_rng) {
  if (config_.architecture == Architecture::kWord) {
    return forward_word(g, params_, config_, view, mode, dropout_rng);
  }
  return forward_doc(g, params_, config_, view, mode, dropout_rng);
}

std::vector<double> Model::logits(const EncodedView& view) {
  Graph g;
  const Var out = forward(g, view, Mode::kEval);
  return out.value().values();
}

namespace {

Var maybe_dropout(Var x, Mode mode, double rate, Rng* rng) {
  if (mode != Mode::kTrain || rate == 0.0) return x;
  if (rng == nullptr) throw ParameterError("train-mode forward needs a dropout RNG");
  return dropout(x, rate, *rng);
}

Var classify(Graph& g, ModelParams& params, Var features) {
  return add_row(matmul(features, g.param(params.get("head.weight"))),
                 g.param(params.get("head.bias")));
}

}  // namespace

Var forward_word(Graph& g, ModelParams& params, const ModelConfig& c, const EncodedView& view,
                 Mode mode, Rng* rng) {
  std::vector<std::int32_t> ids = view.concatenated();
  if (ids.empty()) ids.push_back(Vocabulary::kPad);
  Var x = embedding(g, params.get("embedding"), ids);
  x = maybe_dropout(x, mode, c.dropout, rng);

  std::vector<ConvBank> banks;
  for (std::size_t i = 0; i < c.filter_widths.size(); ++i) {
    banks.push_back({g.param(params.get(bank_name(i, "weight"))),
                     g.param(params.get(bank_name(i, "bias"))),
                     g.param(params.get(bank_name(i, "residual"))), c.filter_widths[i]});
  }
  std::vector<Var> pooled;
  for (Var bank_out : conv1d_multi(x, banks)) pooled.push_back(max_pool_time(bank_out));
  Var features = pooled.size() == 1 ? pooled[0] : concat_cols(pooled);
  features = maybe_dropout(features, mode, c.dropout, rng);
  return classify(g, params, features);
}

Var forward_doc(Graph& g, ModelParams& params, const ModelConfig& c, const EncodedView& view,
                Mode mode, Rng* rng) {
  Var enc_w = g.param(params.get("encoder.weight"));
  Var enc_b = g.param(params.get("encoder.bias"));
  const LstmWeights cell{g.param(params.get("lstm.input")), g.param(params.get("lstm.hidden")),
                         g.param(params.get("lstm.bias"))};
  LstmState state{g.constant(Tensor({1, c.hidden})), g.constant(Tensor({1, c.hidden}))};

  if (view.empty()) {
    state = lstm_step(g.constant(Tensor({1, c.encoder_dim})), state, cell);
  } else {
    for (const auto& doc : view.documents) {
      Var pooled = mean_rows(embedding(g, params.get("embedding"), doc));
      pooled = maybe_dropout(pooled, mode, c.dropout, rng);
      state = lstm_step(add_row(matmul(pooled, enc_w), enc_b), state, cell);
    }
  }
  Var features = maybe_dropout(state.h, mode, c.dropout, rng);
  return classify(g, params, features);
}

}  // namespace lupiet
