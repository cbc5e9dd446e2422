#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lupiet/corpus/corpus.hpp"

namespace lupiet {

enum class TimeMode { kDays, kChunks };

// Parameters of the synthetic time-series text generator.
//
// Every sample has a latent class drawn from `class_prior`. Each token of a
// document is, with probability `rho_early` (document time <= boundary) or
// `rho_late` (after it), one of the latent class's signal tokens; otherwise,
// with probability `noise_rate`, a signal token of a uniformly drawn class;
// otherwise a neutral filler token. The observed label equals the latent
// class except with probability `label_noise`, where it is replaced by a
// different class chosen uniformly.
struct SynthSpec {
  std::size_t num_samples = 1000;
  std::size_t num_classes = 2;
  std::vector<double> class_prior;  // empty = uniform
  std::size_t vocab_size = 200;
  std::size_t signal_tokens_per_class = 8;
  double docs_per_unit = 1.5;  // Poisson rate of documents per unit of time
  double horizon = 7.0;        // longest possible sample
  double min_length = 1.0;     // shortest possible sample
  double boundary = 1.0;       // end of the baseline window
  double rho_early = 0.05;
  double rho_late = 0.3;
  double noise_rate = 0.1;
  double label_noise = 0.0;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 16;
  TimeMode time_mode = TimeMode::kDays;
  std::array<double, 3> split_ratio{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
};

// Throws ParameterError naming the first invalid field.
void validate(const SynthSpec& spec);

std::string signal_token(std::size_t cls, std::size_t j);
std::string filler_token(std::size_t j);

// Deterministic in `spec` (including the seed). Samples are emitted in id
// order; split membership is a seeded permutation with exact counts
// round(n * ratio) for train and validation, the rest test.
Corpus generate_synthetic(const SynthSpec& spec);

}  // namespace lupiet
