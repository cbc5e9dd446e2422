#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lupiet/metrics/metrics.hpp"

namespace lupiet {

// Stratified, nested subsample of `pool` (positions into a corpus) at `ratio`.
// Each class is permuted once per seed and the first llround(ratio * n_c)
// members are kept, so the subset at r is contained in the subset at r' > r.
// The result preserves the order of `pool`. Throws SubsampleError when the
// ratio is outside (0, 1] or a class present in the pool ends up empty.
std::vector<std::size_t> stratified_subsample(std::span<const std::size_t> pool,
                                              std::span<const std::size_t> labels,
                                              std::size_t num_classes, double ratio,
                                              std::uint64_t seed);

// Ratios must be in (0, 1]; returned sorted ascending without duplicates.
std::vector<double> validate_ratios(std::vector<double> ratios);

struct CurveRow {
  double ratio = 1.0;
  MetricsReport report;
};

// ratio,strategy,window,seed_count,metric,mean,std
void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows);

struct CurveGap {
  double min_ratio = 0.0;
  double gap_at_min = 0.0;   // mean(candidate) - mean(reference) at the smallest ratio
  double gap_at_full = 0.0;  // same at ratio 1.0
  bool shrinks() const noexcept { return gap_at_min > gap_at_full; }
};

// Gap between two strategies' mean `metric`; nullopt when the table lacks
// ratio 1.0, the smallest ratio, or either strategy.
std::optional<CurveGap> curve_gap(const std::vector<CurveRow>& rows, const std::string& reference,
                                  const std::string& candidate, const std::string& metric);

// "# gap auroc lupiet-baseline: ratio 0.100 +0.012345, ratio 1.000 +0.001234, shrinks"
std::string format_gap_summary(const CurveGap& gap, const std::string& reference,
                               const std::string& candidate, const std::string& metric);

}  // namespace lupiet
