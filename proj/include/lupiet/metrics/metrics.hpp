#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace lupiet {

struct ScoredPredictions {
  std::size_t num_classes = 2;
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> scores;  // per sample, length num_classes

  void add(std::size_t label, std::vector<double> score) {
    labels.push_back(label);
    scores.push_back(std::move(score));
  }
  std::size_t size() const noexcept { return labels.size(); }
};

// Throws MetricError when empty, a label is out of range, or a score vector
// has the wrong length.
void validate(const ScoredPredictions& preds);

// Mann-Whitney AUROC over the class-1 score, ties credited 1/2.
double auroc(const ScoredPredictions& preds);
double auroc(std::span<const std::size_t> labels, std::span<const double> scores);

// Average precision over the class-1 score. Descending score order, equal
// scores ordered by original index.
double aupr(const ScoredPredictions& preds);
double aupr(std::span<const std::size_t> labels, std::span<const double> scores);

// Argmax (first index on ties) against the label.
double accuracy(const ScoredPredictions& preds);
// Unweighted mean of per-class F1 over all classes; 0/0 terms count as 0.
double macro_f1(const ScoredPredictions& preds);

// AUROC and AUPR for binary tasks, accuracy and macro-F1 always.
std::map<std::string, double> task_metrics(const ScoredPredictions& preds);

struct MetricSummary {
  std::vector<double> values;  // per seed, in seed order
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single seed
};

struct MetricsReport {
  std::string strategy;
  std::string window;
  std::size_t seed_count = 0;
  std::map<std::string, MetricSummary> metrics;
};

MetricsReport aggregate_seeds(const std::vector<std::map<std::string, double>>& per_seed,
                              std::string strategy = {}, std::string window = {});

// strategy,window,seed_count,metric,mean,std
void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& reports);

// Fixed-precision decimal used in every table so reruns compare byte-for-byte.
std::string format_metric(double v);

}  // namespace lupiet
