#pragma once

#include "confsteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace confsteer {

struct CalibrationBin {
  double lo = 0;
  double hi = 0;
  std::size_t count = 0;
  double mean_confidence = 0;
  double mean_accuracy = 0;
};

struct CalibrationReport {
  double ece = 0;
  double brier = 0;
  double mae = 0;
  std::vector<CalibrationBin> bins;
};

/// Equal-width bin index for a confidence in [0,1]; the last bin is closed.
inline std::size_t calibration_bin(double confidence, std::size_t n_bins) {
  const auto idx = static_cast<std::size_t>(
      std::floor(confidence * static_cast<double>(n_bins)));
  return std::min(idx, n_bins - 1);
}

/// ECE over equal-width bins plus the question-level Brier score and MAE.
/// Every bin is reported, including empty ones (count 0, means 0).
template <typename DerivedC, typename DerivedA>
CalibrationReport ece(const Eigen::MatrixBase<DerivedC> &confidence,
                      const Eigen::MatrixBase<DerivedA> &accuracy,
                      std::size_t n_bins = 10) {
  const Eigen::Index n = confidence.size();
  if (n == 0)
    throw ValidationError("ece: empty input");
  if (accuracy.size() != n)
    throw ValidationError("ece: confidence and accuracy lengths differ");
  if (n_bins < 1)
    throw ValidationError("ece: n_bins must be >= 1");

  CalibrationReport report;
  report.bins.resize(n_bins);
  std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
  double sq = 0, abs_err = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = static_cast<double>(confidence(i));
    const double a = static_cast<double>(accuracy(i));
    if (!(c >= 0.0 && c <= 1.0) || !(a >= 0.0 && a <= 1.0))
      throw ValidationError("ece: value outside [0,1] at index " +
                            std::to_string(i));
    const std::size_t b = calibration_bin(c, n_bins);
    ++report.bins[b].count;
    conf_sum[b] += c;
    acc_sum[b] += a;
    sq += (c - a) * (c - a);
    abs_err += std::abs(c - a);
  }
  const double total = static_cast<double>(n);
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto &bin = report.bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(n_bins);
    bin.hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    if (bin.count == 0)
      continue;
    const double cnt = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / cnt;
    bin.mean_accuracy = acc_sum[b] / cnt;
    report.ece +=
        (cnt / total) * std::abs(bin.mean_confidence - bin.mean_accuracy);
  }
  report.brier = sq / total;
  report.mae = abs_err / total;
  return report;
}

/// Recomputes ECE from a report's bins alone.
inline double ece_from_bins(const std::vector<CalibrationBin> &bins) {
  std::size_t total = 0;
  for (const auto &b : bins)
    total += b.count;
  if (total == 0)
    return 0.0;
  double e = 0;
  for (const auto &b : bins) {
    if (b.count == 0)
      continue;
    e += (static_cast<double>(b.count) / static_cast<double>(total)) *
         std::abs(b.mean_confidence - b.mean_accuracy);
  }
  return e;
}

/// Per-sample Brier score against binary outcomes.
inline double brier_binary(const std::vector<double> &confidence,
                           const std::vector<bool> &correct) {
  if (confidence.empty() || confidence.size() != correct.size())
    throw ValidationError("brier_binary: empty or misaligned input");
  double sq = 0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const double o = correct[i] ? 1.0 : 0.0;
    sq += (confidence[i] - o) * (confidence[i] - o);
  }
  return sq / static_cast<double>(confidence.size());
}

} // namespace confsteer
