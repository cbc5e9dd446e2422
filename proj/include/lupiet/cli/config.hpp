#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "lupiet/corpus/synth.hpp"
#include "lupiet/corpus/vocab.hpp"
#include "lupiet/models/model.hpp"
#include "lupiet/training/training.hpp"

namespace lupiet::cli {

// Experiment description read from a JSON document. See docs/config.md for
// the schema; unknown keys are rejected so typos surface as errors.
struct ExperimentConfig {
  std::optional<std::filesystem::path> corpus_path;  // resolved against the config's directory
  std::optional<SynthSpec> synth;                    // exactly one of corpus_path / synth
  std::optional<std::size_t> num_classes;            // default: inferred from the corpus
  double baseline_window = 1.0;
  std::vector<double> extended_windows;  // strictly increasing, all > baseline_window
  std::vector<Strategy> strategies{Strategy::kBaseline};
  std::size_t min_frequency = 1;
  EncodingLimits encoding;
  ModelConfig model;  // vocab_size and num_classes are filled in from the data
  TrainConfig train;  // seed and window are set per run
  std::vector<double> taus{2.0};
  std::vector<double> alphas{0.5};
  bool tau_squared = false;
  KlDirection direction = KlDirection::kStudentTeacher;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "output";  // resolved against the config's directory
  std::size_t jobs = 1;
};

// Throws ConfigError naming the offending field.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Per-run seed: a counter-based derivation from the master seed and the
// declared seed value. Strategies share it, so adding one never shifts the
// streams of another.
std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t seed);

}  // namespace lupiet::cli
