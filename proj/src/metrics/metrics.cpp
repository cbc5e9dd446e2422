#include "lupiet/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lupiet/diffcore/ops.hpp"
#include "lupiet/error.hpp"

namespace lupiet {
namespace {

std::vector<double> positive_scores(const ScoredPredictions& preds) {
  validate(preds);
  if (preds.num_classes != 2) throw MetricError("AUROC/AUPR need a binary task");
  std::vector<double> s;
  s.reserve(preds.size());
  for (const auto& v : preds.scores) s.push_back(v[1]);
  return s;
}

void check_binary(std::span<const std::size_t> labels, std::span<const double> scores) {
  if (labels.empty()) throw MetricError("no predictions");
  if (labels.size() != scores.size()) throw MetricError("labels and scores differ in length");
  for (std::size_t y : labels)
    if (y > 1) throw MetricError("binary metric given label " + std::to_string(y));
}

}  // namespace

void validate(const ScoredPredictions& p) {
  if (p.labels.empty()) throw MetricError("no predictions");
  if (p.labels.size() != p.scores.size()) throw MetricError("labels and scores differ in length");
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (p.labels[i] >= p.num_classes) {
      throw MetricError("label " + std::to_string(p.labels[i]) + " out of range");
    }
    if (p.scores[i].size() != p.num_classes) {
      throw MetricError("score vector " + std::to_string(i) + " has wrong length");
    }
  }
}

double auroc(std::span<const std::size_t> labels, std::span<const double> scores) {
  check_binary(labels, scores);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks (1-based) over tie groups.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("AUROC undefined: only one class present");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double auroc(const ScoredPredictions& preds) {
  const auto s = positive_scores(preds);
  return auroc(preds.labels, s);
}

double aupr(std::span<const std::size_t> labels, std::span<const double> scores) {
  check_binary(labels, scores);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[order[r]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) throw MetricError("AUPR undefined: no positive samples");
  return sum / static_cast<double>(hits);
}

double aupr(const ScoredPredictions& preds) {
  const auto s = positive_scores(preds);
  return aupr(preds.labels, s);
}

double accuracy(const ScoredPredictions& preds) {
  validate(preds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (pure::argmax(preds.scores[i]) == preds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_f1(const ScoredPredictions& preds) {
  validate(preds);
  const std::size_t k = preds.num_classes;
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t yhat = pure::argmax(preds.scores[i]);
    const std::size_t y = preds.labels[i];
    if (yhat == y) {
      ++tp[y];
    } else {
      ++fp[yhat];
      ++fn[y];
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return total / static_cast<double>(k);
}

std::map<std::string, double> task_metrics(const ScoredPredictions& preds) {
  std::map<std::string, double> m;
  if (preds.num_classes == 2) {
    m["auroc"] = auroc(preds);
    m["aupr"] = aupr(preds);
  }
  m["accuracy"] = accuracy(preds);
  m["macro_f1"] = macro_f1(preds);
  return m;
}

MetricsReport aggregate_seeds(const std::vector<std::map<std::string, double>>& per_seed,
                              std::string strategy, std::string window) {
  if (per_seed.empty()) throw AggregationError("no per-seed metrics to aggregate");
  MetricsReport report;
  report.strategy = std::move(strategy);
  report.window = std::move(window);
  report.seed_count = per_seed.size();
  for (const auto& m : per_seed) {
    if (m.size() != per_seed.front().size() ||
        !std::equal(m.begin(), m.end(), per_seed.front().begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw AggregationError("per-seed metric maps have inconsistent keys");
    }
  }
  for (const auto& [name, unused] : per_seed.front()) {
    MetricSummary s;
    for (const auto& m : per_seed) s.values.push_back(m.at(name));
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    if (s.values.size() > 1) {
      double ss = 0.0;
      for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / (n - 1.0));
    }
    report.metrics.emplace(name, std::move(s));
  }
  return report;
}

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "strategy,window,seed_count,metric,mean,std\n";
  for (const MetricsReport& r : reports) {
    for (const auto& [name, s] : r.metrics) {
      out << r.strategy << ',' << r.window << ',' << r.seed_count << ',' << name << ','
          << format_metric(s.mean) << ',' << format_metric(s.std) << '\n';
    }
  }
}

}  // namespace lupiet
