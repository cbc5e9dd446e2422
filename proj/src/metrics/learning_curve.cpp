#include "lupiet/metrics/learning_curve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {

std::vector<std::size_t> stratified_subsample(std::span<const std::size_t> pool,
                                              std::span<const std::size_t> labels,
                                              std::size_t num_classes, double ratio,
                                              std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw SubsampleError("ratio must be in (0, 1], got " + std::to_string(ratio));
  }
  if (pool.size() != labels.size()) throw SubsampleError("pool and labels differ in length");

  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (labels[i] >= num_classes) throw SubsampleError("label out of range");
    by_class[labels[i]].push_back(i);
  }

  // One permutation per class and seed; the ratio only picks the prefix length.
  Rng rng(derive_seed(seed, streams::kSubsample));
  std::vector<char> keep(pool.size(), 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    rng.shuffle(members);
    if (members.empty()) continue;
    const auto take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    if (take == 0) {
      throw SubsampleError("ratio " + std::to_string(ratio) + " leaves class " + std::to_string(c) +
                           " empty");
    }
    for (std::size_t j = 0; j < take; ++j) keep[members[j]] = 1;
  }

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (keep[i]) out.push_back(pool[i]);
  return out;
}

std::vector<double> validate_ratios(std::vector<double> ratios) {
  if (ratios.empty()) throw ValidationError("ratios: at least one ratio is required");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ValidationError("ratios: " + std::to_string(r) + " is outside (0, 1]");
    }
  }
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
  return ratios;
}

void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "ratio,strategy,window,seed_count,metric,mean,std\n";
  for (const CurveRow& row : rows) {
    for (const auto& [name, s] : row.report.metrics) {
      out << format_metric(row.ratio) << ',' << row.report.strategy << ',' << row.report.window
          << ',' << row.report.seed_count << ',' << name << ',' << format_metric(s.mean) << ','
          << format_metric(s.std) << '\n';
    }
  }
}

namespace {

const MetricSummary* find(const std::vector<CurveRow>& rows, double ratio,
                          const std::string& strategy, const std::string& metric) {
  for (const CurveRow& row : rows) {
    if (row.ratio != ratio || row.report.strategy != strategy) continue;
    auto it = row.report.metrics.find(metric);
    if (it != row.report.metrics.end()) return &it->second;
  }
  return nullptr;
}

}  // namespace

std::optional<CurveGap> curve_gap(const std::vector<CurveRow>& rows, const std::string& reference,
                                  const std::string& candidate, const std::string& metric) {
  if (rows.empty()) return std::nullopt;
  double min_ratio = rows.front().ratio;
  for (const CurveRow& row : rows) min_ratio = std::min(min_ratio, row.ratio);
  const auto* ref_min = find(rows, min_ratio, reference, metric);
  const auto* cand_min = find(rows, min_ratio, candidate, metric);
  const auto* ref_full = find(rows, 1.0, reference, metric);
  const auto* cand_full = find(rows, 1.0, candidate, metric);
  if (!ref_min || !cand_min || !ref_full || !cand_full) return std::nullopt;
  CurveGap gap;
  gap.min_ratio = min_ratio;
  gap.gap_at_min = cand_min->mean - ref_min->mean;
  gap.gap_at_full = cand_full->mean - ref_full->mean;
  return gap;
}

std::string format_gap_summary(const CurveGap& gap, const std::string& reference,
                               const std::string& candidate, const std::string& metric) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "# gap %s %s-%s: ratio %.3f %+.6f, ratio 1.000 %+.6f, %s",
                metric.c_str(), candidate.c_str(), reference.c_str(), gap.min_ratio,
                gap.gap_at_min, gap.gap_at_full, gap.shrinks() ? "shrinks" : "does not shrink");
  return buf;
}

}  // namespace lupiet
