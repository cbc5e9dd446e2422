#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lupiet/cli/config.hpp"
#include "lupiet/corpus/corpus.hpp"
#include "lupiet/corpus/vocab.hpp"
#include "lupiet/metrics/learning_curve.hpp"
#include "lupiet/metrics/metrics.hpp"
#include "lupiet/training/training.hpp"

namespace lupiet::cli {

// Corpus, vocabulary and encoding shared by every run of an experiment.
struct Experiment {
  ExperimentConfig config;
  Corpus corpus;
  Vocabulary vocab;
  std::unique_ptr<EncodedCorpus> encoded;
  Dataset data;
  ModelConfig model;  // config.model with vocab_size and num_classes filled in
};

std::unique_ptr<Experiment> load_experiment(ExperimentConfig config);

// One row of a comparison: a strategy with the windows it consumes.
//   baseline  {b}                 "1"
//   teacher   {w}                 "3"
//   lupiet    {b, w}              "3"        (teacher window)
//   transfer  {w_k, ..., w_1, b}  "7->3->1"
//   mixed     {b, w_1, ..., w_k}  "1+3+7"
struct RowSpec {
  Strategy strategy = Strategy::kBaseline;
  std::vector<double> windows;
  std::string label;
};

// Rows in table order: baseline first, then each requested strategy with one
// row per extended window.
std::vector<RowSpec> plan_rows(const ExperimentConfig& config, std::vector<Strategy> strategies);

struct SeedRun {
  std::uint64_t seed = 0;      // declared seed value
  std::uint64_t run_seed = 0;  // derived per-run seed
  std::optional<TrainResult> result;
  std::optional<RunRecord> failed_record;  // partial record of a diverged run
  std::string error;
};

struct GridPoint {
  DistillConfig distill;
  double validation_metric = 0.0;
};

struct RowResult {
  RowSpec spec;
  std::vector<SeedRun> runs;  // seed order
  std::optional<DistillConfig> chosen;
  std::vector<GridPoint> grid;

  bool ok() const;
  std::string error() const;  // first failure, empty when ok
  MetricsReport report() const;
};

struct RunSet {
  std::vector<RowResult> rows;
  std::vector<RowResult> teachers;  // every teacher the rows needed
};

// Trains every row over all seeds. `per_seed` holds the dataset of each seed
// (learning curves subsample per seed); runs execute on up to `jobs` threads
// and results land in fixed slots, so output never depends on scheduling.
RunSet run_rows(const Experiment& exp, const std::vector<RowSpec>& rows,
                const std::vector<Dataset>& per_seed, std::size_t jobs);

// <root>/<strategy>/<variant>/seed-<N>/{checkpoint.bin,record.jsonl}, plus
// grid.csv next to the seed directories of distilled rows.
void write_artifacts(const Experiment& exp, const RunSet& runs, const std::filesystem::path& root);

// strategy,window,seed_count,metric,mean,std; failed rows follow as comments.
void write_matrix_csv(std::ostream& out, const std::vector<RowResult>& rows);
// Row groups per strategy with "mean (std)" cells.
std::string format_matrix_table(const std::vector<RowResult>& rows);

struct CurveResult {
  std::vector<CurveRow> rows;
  std::vector<std::string> failures;
};

// Baseline, teacher and LuPIET rows at each ratio. Each seed draws its own
// nested stratified subset; teachers train on the same subset.
CurveResult run_learning_curve(const Experiment& exp, const std::vector<double>& ratios,
                               std::size_t jobs, const std::filesystem::path* artifacts = nullptr);

// Subcommands. Return the process exit code: 0 success, 1 runtime failure,
// 2 usage or validation error.
int cmd_gen_data(const std::filesystem::path& spec, const std::filesystem::path& out_path,
                 std::ostream& out, std::ostream& err);
int cmd_train(const std::filesystem::path& config, const std::string& strategy,
              std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs,
              std::ostream& out, std::ostream& err);
int cmd_compare(const std::filesystem::path& config, std::optional<std::size_t> jobs,
                std::ostream& out, std::ostream& err);
int cmd_curve(const std::filesystem::path& config, const std::string& ratios,
              std::optional<std::size_t> jobs, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lupiet::cli
