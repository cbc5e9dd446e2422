#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lupiet/corpus/vocab.hpp"
#include "lupiet/diffcore/graph.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {

enum class Architecture { kWord, kDoc };

std::string_view architecture_name(Architecture a);
std::optional<Architecture> parse_architecture(std::string_view s);

struct ModelConfig {
  Architecture architecture = Architecture::kWord;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t num_classes = 2;
  // word-level: residual convolution banks
  std::vector<std::size_t> filter_widths{3, 5, 7};
  std::size_t filters = 16;
  // document-level: encoder and recurrent cell
  std::size_t encoder_dim = 32;
  std::size_t hidden = 32;
  double dropout = 0.1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws ParameterError on non-positive dimensions or an invalid dropout.
void validate(const ModelConfig& config);

// Number of scalars the architecture should own, from the config alone.
std::size_t expected_parameter_count(const ModelConfig& config);

// Named parameter registry. Order of registration is the optimizer order.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(Architecture arch, std::uint64_t seed) : architecture_(arch), seed_(seed) {}

  Parameter& add(std::string name, Tensor value);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter*> all();
  const std::vector<Parameter>& entries() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();
  bool all_finite() const;

  Architecture architecture() const noexcept { return architecture_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Values only (names, shapes, data); gradients are ignored.
  bool same_values(const ModelParams& other) const;

 private:
  std::vector<Parameter> params_;
  Architecture architecture_ = Architecture::kWord;
  std::uint64_t seed_ = 0;
};

enum class Mode { kTrain, kEval };

class Model {
 public:
  Model(ModelConfig config, ModelParams params);

  // Deterministic per seed. Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out));
  // biases zero; recurrent forget-gate bias 1.
  static Model init(const ModelConfig& config, std::uint64_t seed);

  // Logits [1 x K]. `dropout_rng` is only consulted in train mode.
  Var forward(Graph& g, const EncodedView& view, Mode mode, Rng* dropout_rng = nullptr);

  // Eval-mode logits as plain values.
  std::vector<double> logits(const EncodedView& view);

  const ModelConfig& config() const noexcept { return config_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }

 private:
  ModelConfig config_;
  ModelParams params_;
};

// Word-level model: tokens of all documents concatenated, embedded, passed
// through residual convolution banks, max-pooled per bank, classified.
Var forward_word(Graph& g, ModelParams& params, const ModelConfig& config,
                 const EncodedView& view, Mode mode, Rng* dropout_rng);

// Document-level model: each document mean-pooled and projected, then an
// LSTM over documents in time order; classifier on the last hidden state.
Var forward_doc(Graph& g, ModelParams& params, const ModelConfig& config,
                const EncodedView& view, Mode mode, Rng* dropout_rng);

// Binary checkpoint: magic, architecture tag, model config (JSON), vocabulary
// hash, init seed, then each parameter's name, shape and raw f64 data.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::uint64_t vocab_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     std::uint64_t vocab_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace lupiet
