#include "lupiet/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "lupiet/diffcore/adam.hpp"
#include "lupiet/diffcore/ops.hpp"

namespace lupiet {
namespace {

struct Instance {
  std::size_t sample;
  double window;
};

struct FitSpec {
  Strategy tag = Strategy::kBaseline;
  std::vector<Instance> instances;
  double eval_window = 1.0;
  // Present for distillation: one logit row per instance.
  const std::vector<std::vector<double>>* teacher = nullptr;
  DistillConfig distill;
  std::vector<double> windows;
};

SelectionMetric resolve(SelectionMetric m, std::size_t k) {
  if (m != SelectionMetric::kAuto) return m;
  return k == 2 ? SelectionMetric::kAuroc : SelectionMetric::kMacroF1;
}

double selection_value(SelectionMetric m, const ScoredPredictions& preds) {
  return m == SelectionMetric::kAuroc ? auroc(preds) : macro_f1(preds);
}

double mean_cross_entropy(const ScoredPredictions& logits) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += pure::cross_entropy(logits.scores[i], logits.labels[i]);
  }
  return total / static_cast<double>(logits.size());
}

// Logits -> probabilities, in place.
ScoredPredictions to_probabilities(ScoredPredictions p) {
  for (auto& s : p.scores) s = pure::softmax_with_temperature(s, 1.0);
  return p;
}

ScoredPredictions predict_logits(Model& model, const EncodedCorpus& corpus,
                                 const std::vector<std::size_t>& samples, double window) {
  ScoredPredictions out;
  out.num_classes = corpus.num_classes();
  for (std::size_t i : samples) {
    out.add(corpus.sample(i).label, model.logits(corpus.view(i, window)));
  }
  return out;
}

RunRecord fit(Model& model, const Dataset& data, const TrainConfig& config, const FitSpec& spec) {
  validate(config);
  const EncodedCorpus& corpus = *data.corpus;
  if (spec.instances.empty()) throw CorpusError("training split is empty");
  if (data.validation.empty()) throw CorpusError("validation split is empty");

  RunRecord record;
  record.strategy = spec.tag;
  record.windows = spec.windows;
  record.eval_window = spec.eval_window;
  record.model = model.config();
  record.train = config;
  if (spec.teacher) {
    record.distill = spec.distill;
    record.notes["kd_student_logits"] = "train-mode";
    record.notes["teacher_logits"] = "eval-mode, cached once";
    record.notes["teacher_architecture"] = "identical to student";
    record.notes["kl_direction"] = std::string(kl_direction_name(spec.distill.direction));
  }
  const SelectionMetric metric = resolve(config.selection, corpus.num_classes());
  record.notes["selection_metric"] = std::string(selection_metric_name(metric));

  AdamState adam(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng shuffle_rng(derive_seed(config.seed, streams::kShuffle));
  Rng dropout_rng(derive_seed(config.seed, streams::kDropout));
  auto params = model.params().all();

  ModelParams best = model.params();
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(spec.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const Instance& inst = spec.instances[order[b]];
        const std::size_t label = corpus.sample(inst.sample).label;
        Graph g;
        Var logits =
            model.forward(g, corpus.view(inst.sample, inst.window), Mode::kTrain, &dropout_rng);
        Var loss;
        if (spec.teacher) {
          const auto& t = (*spec.teacher)[order[b]];
          loss = combined_loss(logits, g.constant(Tensor::row(t)), label, spec.distill);
        } else {
          loss = cross_entropy(logits, label);
        }
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
          record.diverged = true;
          record.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(record.step_losses.size() + 1);
          throw TrainingAborted(std::move(record));
        }
        batch_loss += value;
        g.backward(loss, inv_batch);
      }
      adam_step(params, adam);
      record.step_losses.push_back(batch_loss * inv_batch);
      epoch_loss += batch_loss;
    }
    if (!model.params().all_finite()) {
      record.diverged = true;
      record.diagnostic = "non-finite parameters after epoch " + std::to_string(epoch);
      throw TrainingAborted(std::move(record));
    }

    const ScoredPredictions val =
        predict_logits(model, corpus, data.validation, spec.eval_window);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(order.size());
    log.validation_loss = mean_cross_entropy(val);
    log.validation_metric = selection_value(metric, to_probabilities(val));
    record.epochs.push_back(log);

    if (log.validation_metric > best_metric) {
      best_metric = log.validation_metric;
      best = model.params();
      record.selected_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  model.params() = std::move(best);
  record.selected_metric = best_metric;
  if (!data.test.empty()) {
    record.test_metrics = task_metrics(predict(model, corpus, data.test, spec.eval_window));
  }
  return record;
}

std::vector<Instance> instances_for(const std::vector<std::size_t>& samples,
                                    const std::vector<double>& windows) {
  std::vector<Instance> out;
  out.reserve(samples.size() * windows.size());
  for (std::size_t s : samples)
    for (double w : windows) out.push_back({s, w});
  return out;
}

ModelConfig resolved_model(const ModelConfig& model, const Dataset& data) {
  ModelConfig c = model;
  c.num_classes = data.corpus->num_classes();
  return c;
}

}  // namespace

std::string_view selection_metric_name(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::kAuto:
      return "auto";
    case SelectionMetric::kAuroc:
      return "auroc";
    case SelectionMetric::kMacroF1:
      return "macro_f1";
  }
  return "auto";
}

std::optional<SelectionMetric> parse_selection_metric(std::string_view s) {
  if (s == "auto") return SelectionMetric::kAuto;
  if (s == "auroc") return SelectionMetric::kAuroc;
  if (s == "macro_f1") return SelectionMetric::kMacroF1;
  return std::nullopt;
}

void validate(const TrainConfig& c) {
  if (c.max_epochs == 0) throw ParameterError("train.max_epochs must be positive");
  if (c.batch_size == 0) throw ParameterError("train.batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw ParameterError("train.learning_rate must be positive");
  if (!(c.weight_decay >= 0.0)) throw ParameterError("train.weight_decay must be nonnegative");
  if (c.patience == 0) throw ParameterError("train.patience must be positive");
  if (!(c.window > 0.0)) throw ParameterError("train.window must be positive");
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBaseline:
      return "baseline";
    case Strategy::kTeacher:
      return "teacher";
    case Strategy::kLupiet:
      return "lupiet";
    case Strategy::kTransfer:
      return "transfer";
    case Strategy::kMixed:
      return "mixed";
  }
  return "baseline";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy st : {Strategy::kBaseline, Strategy::kTeacher, Strategy::kLupiet,
                      Strategy::kTransfer, Strategy::kMixed}) {
    if (strategy_name(st) == s) return st;
  }
  return std::nullopt;
}

std::string format_window(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

void write_run_record(std::ostream& out, const RunRecord& r) {
  using nlohmann::json;
  json header = {
      {"type", "run"},
      {"strategy", std::string(strategy_name(r.strategy))},
      {"windows", r.windows},
      {"eval_window", r.eval_window},
      {"seed", r.train.seed},
      {"model", json::parse(model_config_to_json(r.model))},
      {"train",
       {{"max_epochs", r.train.max_epochs},
        {"batch_size", r.train.batch_size},
        {"learning_rate", r.train.learning_rate},
        {"weight_decay", r.train.weight_decay},
        {"patience", r.train.patience},
        {"selection", std::string(selection_metric_name(r.train.selection))},
        {"window", r.train.window}}},
      {"notes", r.notes},
  };
  if (r.distill) {
    header["distill"] = {{"tau", r.distill->tau},
                         {"alpha", r.distill->alpha},
                         {"tau_squared", r.distill->tau_squared},
                         {"direction", std::string(kl_direction_name(r.distill->direction))}};
  }
  out << header.dump() << '\n';
  for (const EpochLog& e : r.epochs) {
    out << json{{"type", "epoch"},
                {"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"validation_loss", e.validation_loss},
                {"validation_metric", e.validation_metric}}
               .dump()
        << '\n';
  }
  json summary = {{"type", "summary"},
                  {"selected_epoch", r.selected_epoch},
                  {"selected_metric", r.selected_metric},
                  {"steps", r.step_losses.size()},
                  {"test_metrics", r.test_metrics},
                  {"diverged", r.diverged}};
  if (!r.diagnostic.empty()) summary["diagnostic"] = r.diagnostic;
  out << summary.dump() << '\n';
}

Dataset Dataset::from(const EncodedCorpus& corpus) {
  Dataset d;
  d.corpus = &corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    switch (corpus.sample(i).split) {
      case Split::kTrain:
        d.train.push_back(i);
        break;
      case Split::kValidation:
        d.validation.push_back(i);
        break;
      case Split::kTest:
        d.test.push_back(i);
        break;
    }
  }
  return d;
}

Dataset Dataset::with_train(std::vector<std::size_t> subset) const {
  Dataset d = *this;
  d.train = std::move(subset);
  return d;
}

ScoredPredictions predict(Model& model, const EncodedCorpus& corpus,
                          const std::vector<std::size_t>& samples, double window) {
  return to_probabilities(predict_logits(model, corpus, samples, window));
}

TrainResult train_standard(const Dataset& data, const ModelConfig& model,
                           const TrainConfig& config, Strategy tag) {
  return train_standard_from(data, Model::init(resolved_model(model, data), config.seed), config,
                             tag);
}

TrainResult train_standard_from(const Dataset& data, Model start, const TrainConfig& config,
                                Strategy tag) {
  FitSpec spec;
  spec.tag = tag;
  spec.instances = instances_for(data.train, {config.window});
  spec.eval_window = config.window;
  spec.windows = {config.window};
  RunRecord rec = fit(start, data, config, spec);
  return {std::move(start), {std::move(rec)}};
}

std::vector<std::vector<double>> teacher_logits(Model& teacher, const Dataset& data,
                                                double teacher_window) {
  std::vector<std::vector<double>> out;
  out.reserve(data.train.size());
  for (std::size_t i : data.train) {
    out.push_back(teacher.logits(data.corpus->view(i, teacher_window)));
  }
  return out;
}

TrainResult train_student(const Dataset& data, const ModelConfig& model,
                          const TrainConfig& config, Model& teacher, double teacher_window,
                          const DistillConfig& distill) {
  validate(distill);
  if (!(teacher_window > config.window)) {
    throw ParameterError("teacher window must be longer than the baseline window");
  }
  const auto cached = teacher_logits(teacher, data, teacher_window);
  FitSpec spec;
  spec.tag = Strategy::kLupiet;
  spec.instances = instances_for(data.train, {config.window});
  spec.eval_window = config.window;
  spec.teacher = &cached;
  spec.distill = distill;
  spec.windows = {config.window, teacher_window};
  Model student = Model::init(resolved_model(model, data), config.seed);
  RunRecord rec = fit(student, data, config, spec);
  return {std::move(student), {std::move(rec)}};
}

LupietResult train_lupiet(const Dataset& data, const ModelConfig& model, const TrainConfig& config,
                          double teacher_window, const DistillConfig& distill) {
  validate(distill);
  if (!(teacher_window > config.window)) {
    throw ParameterError("teacher window must be longer than the baseline window");
  }
  TrainConfig teacher_cfg = config;
  teacher_cfg.window = teacher_window;
  TrainResult teacher = train_standard(data, model, teacher_cfg, Strategy::kTeacher);
  TrainResult student = train_student(data, model, config, teacher.model, teacher_window, distill);
  return {std::move(teacher), std::move(student)};
}

namespace {

void check_transfer_windows(const std::vector<double>& windows, double baseline) {
  if (windows.empty()) throw ParameterError("transfer needs at least one window");
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (!(windows[i] < windows[i - 1])) {
      throw ParameterError("transfer windows must be strictly decreasing");
    }
  }
  if (windows.back() != baseline) {
    throw ParameterError("transfer windows must end at the baseline window");
  }
}

}  // namespace

TrainResult train_transfer(const Dataset& data, const ModelConfig& model,
                           const TrainConfig& config, const std::vector<double>& windows) {
  check_transfer_windows(windows, config.window);
  TrainConfig first = config;
  first.window = windows.front();
  const Strategy tag = windows.size() == 1 ? Strategy::kBaseline : Strategy::kTeacher;
  TrainResult stage = train_standard(data, model, first, tag);
  return continue_transfer(data, std::move(stage), config, windows);
}

TrainResult continue_transfer(const Dataset& data, TrainResult first_stage,
                              const TrainConfig& config, const std::vector<double>& windows) {
  check_transfer_windows(windows, config.window);
  TrainResult acc = std::move(first_stage);
  if (windows.size() == 1) {
    acc.records.back().strategy = Strategy::kBaseline;
    return acc;
  }
  for (std::size_t s = 1; s < windows.size(); ++s) {
    TrainConfig stage_cfg = config;
    stage_cfg.window = windows[s];
    TrainResult next =
        train_standard_from(data, std::move(acc.model), stage_cfg, Strategy::kTransfer);
    RunRecord rec = std::move(next.records.back());
    rec.windows.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(s) + 1);
    rec.notes["stage"] = std::to_string(s + 1) + "/" + std::to_string(windows.size());
    acc.records.push_back(std::move(rec));
    acc.model = std::move(next.model);
  }
  return acc;
}

TrainResult train_mixed(const Dataset& data, const ModelConfig& model, const TrainConfig& config,
                        const std::vector<double>& windows) {
  std::vector<double> sorted = windows;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (std::find(sorted.begin(), sorted.end(), config.window) == sorted.end()) {
    throw ParameterError("mixed windows must include the baseline window");
  }
  FitSpec spec;
  spec.tag = sorted.size() == 1 ? Strategy::kBaseline : Strategy::kMixed;
  spec.instances = instances_for(data.train, sorted);
  spec.eval_window = config.window;
  spec.windows = sorted;
  Model m = Model::init(resolved_model(model, data), config.seed);
  RunRecord rec = fit(m, data, config, spec);
  return {std::move(m), {std::move(rec)}};
}

}  // namespace lupiet
