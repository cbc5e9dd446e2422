#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lupiet/corpus/vocab.hpp"
#include "lupiet/error.hpp"
#include "lupiet/metrics/metrics.hpp"
#include "lupiet/models/model.hpp"
#include "lupiet/training/losses.hpp"

namespace lupiet {

enum class SelectionMetric { kAuto, kAuroc, kMacroF1 };

std::string_view selection_metric_name(SelectionMetric m);
std::optional<SelectionMetric> parse_selection_metric(std::string_view s);

struct TrainConfig {
  std::size_t max_epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t patience = 5;
  // kAuto: validation AUROC for binary tasks, macro-F1 otherwise.
  SelectionMetric selection = SelectionMetric::kAuto;
  std::uint64_t seed = 0;
  double window = 1.0;  // input window for the run (the baseline window for students)

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);

enum class Strategy { kBaseline, kTeacher, kLupiet, kTransfer, kMixed };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_metric = 0.0;
};

struct RunRecord {
  Strategy strategy = Strategy::kBaseline;
  std::vector<double> windows;  // input windows the run consumed, in stage order
  double eval_window = 1.0;
  ModelConfig model;
  TrainConfig train;
  std::optional<DistillConfig> distill;
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;  // mean mini-batch loss per optimizer step
  std::size_t selected_epoch = 0;   // 1-based; argmax of validation metric, first on ties
  double selected_metric = 0.0;
  std::map<std::string, double> test_metrics;
  std::map<std::string, std::string> notes;
  bool diverged = false;
  std::string diagnostic;
};

// Line-delimited JSON: a header line, one line per epoch, one summary line.
void write_run_record(std::ostream& out, const RunRecord& record);

// Raised when a loss turns non-finite; carries the partial record.
class TrainingAborted : public TrainingDivergenceError {
 public:
  explicit TrainingAborted(RunRecord record)
      : TrainingDivergenceError(record.diagnostic), record_(std::move(record)) {}
  const RunRecord& record() const noexcept { return record_; }

 private:
  RunRecord record_;
};

// Which samples a run trains, selects and reports on.
struct Dataset {
  const EncodedCorpus* corpus = nullptr;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  static Dataset from(const EncodedCorpus& corpus);
  Dataset with_train(std::vector<std::size_t> subset) const;
};

struct TrainResult {
  Model model;
  std::vector<RunRecord> records;  // one per stage; the last describes `model`
};

// Plain cross-entropy training on X_t with t = config.window. Used for the
// baseline and, with a longer window, for teachers.
TrainResult train_standard(const Dataset& data, const ModelConfig& model,
                           const TrainConfig& config, Strategy tag = Strategy::kBaseline);

// Same loop from an existing model (warm start).
TrainResult train_standard_from(const Dataset& data, Model start, const TrainConfig& config,
                                Strategy tag);

// Eval-mode teacher logits on the teacher window, one row per train sample.
std::vector<std::vector<double>> teacher_logits(Model& teacher, const Dataset& data,
                                                double teacher_window);

// Student on config.window minimizing the combined loss against a frozen
// teacher. Validation selection uses the task metric on config.window.
TrainResult train_student(const Dataset& data, const ModelConfig& model,
                          const TrainConfig& config, Model& teacher, double teacher_window,
                          const DistillConfig& distill);

struct LupietResult {
  TrainResult teacher;
  TrainResult student;
};

// Teacher via train_standard on teacher_window (same seed), then the student.
LupietResult train_lupiet(const Dataset& data, const ModelConfig& model,
                          const TrainConfig& config, double teacher_window,
                          const DistillConfig& distill);

// Train on windows[0] from scratch, then fine-tune on each later window.
// `windows` must be strictly decreasing and end at config.window.
TrainResult train_transfer(const Dataset& data, const ModelConfig& model,
                           const TrainConfig& config, const std::vector<double>& windows);

// Fine-tuning stages on top of an already trained first stage.
TrainResult continue_transfer(const Dataset& data, TrainResult first_stage,
                              const TrainConfig& config, const std::vector<double>& windows);

// One training instance per (sample, window) pair; validation and test use
// config.window, which must be in `windows`.
TrainResult train_mixed(const Dataset& data, const ModelConfig& model, const TrainConfig& config,
                        const std::vector<double>& windows);

// Eval-mode predictions of `model` on `samples` at `window`.
ScoredPredictions predict(Model& model, const EncodedCorpus& corpus,
                          const std::vector<std::size_t>& samples, double window);

// "1", "3", "2.5"
std::string format_window(double w);

}  // namespace lupiet
