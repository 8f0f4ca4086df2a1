#pragma once

#include "confsteer/activation_store.hpp"
#include "confsteer/numerics/isotonic.hpp"
#include "confsteer/numerics/pchip.hpp"
#include "confsteer/numerics/ridge.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace confsteer {

inline constexpr double kDefaultTauHi = 0.75;
inline constexpr double kDefaultTauLo = 0.25;

/// Contrastive activation-addition direction for one layer.
struct SteeringVector {
  int layer = 0;
  VectorXd raw;
  double mean_activation_norm = 0;
  double tau_hi = kDefaultTauHi;
  double tau_lo = kDefaultTauLo;
  std::size_t num_questions = 0;
  //! Questions lacking a row on one side of the thresholds.
  std::size_t skipped_questions = 0;
};

/// Averages per-question (high-confidence mean - low-confidence mean) over
/// every question with at least one row strictly above tau_hi and one strictly
/// below tau_lo. The norm scale is the mean row norm over the whole dataset.
SteeringVector build_caa(const ActivationDataset &ds,
                         double tau_hi = kDefaultTauHi,
                         double tau_lo = kDefaultTauLo);

/// Unit direction rescaled to the mean activation norm.
VectorXd prepare_direction(const SteeringVector &sv);

template <typename DerivedH, typename DerivedD>
VectorXd apply_steering(const Eigen::MatrixBase<DerivedH> &h,
                        const Eigen::MatrixBase<DerivedD> &direction,
                        double alpha) {
  if (h.size() != direction.size())
    throw ValidationError("apply_steering: dimension mismatch");
  return h.template cast<double>() + alpha * direction.template cast<double>();
}

/// Steering strengths -2.0, -1.9, ..., +2.0.
std::vector<double> default_alpha_grid();
/// The coarse reproduction grid {-0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75}.
std::vector<double> coarse_alpha_grid();

struct SweepPoint {
  double alpha = 0;
  VectorXd confidences; // one entry per question
};

struct TransferKnot {
  double alpha = 0;
  double mean_confidence = 0;
};

/// Smoothed, strictly increasing map from steering strength to mean
/// verbalized confidence.
struct TransferFunction {
  std::vector<TransferKnot> knots;
  MonotoneInterpolant<double> interpolant;
  std::pair<double, double> alpha_range{0, 0};

  double operator()(double alpha) const { return interpolant(alpha); }
};

/// Minimum rise of the smoothed transfer curve; anything flatter means the
/// steering direction has no usable effect.
inline constexpr double kMinTransferRise = 0.01;

/// Per-alpha means, isotonic-smoothed in alpha, equal-value plateaus collapsed
/// to their midpoint alpha, then a monotone cubic through the survivors.
/// Throws FlatTransferError if fewer than two knots survive or the curve rises
/// by less than kMinTransferRise.
TransferFunction fit_transfer(std::vector<SweepPoint> sweep);

struct PlanEntry {
  std::string question_id;
  double probe_raw = 0;
  double target_confidence = 0;
  double alpha_star = 0;
  bool clamped = false;
};

struct SteeringPlan {
  std::vector<PlanEntry> entries;
};

/// Per-question mean probe score, in first-appearance order of question ids.
std::vector<std::pair<std::string, double>>
question_probe_scores(const RidgeFit<double> &probe, const ActivationDataset &ds);

/// Stage 1 calibration: isotonic map from per-question probe scores to
/// per-question empirical accuracy on the given (validation) rows.
IsotonicModel<double> calibrate_probe(const RidgeFit<double> &probe,
                                      const ActivationDataset &val_ds);

/// Stage 2: per-question target confidence and inverted steering strength for
/// every question in `test_ds`.
SteeringPlan plan_adaptive(const RidgeFit<double> &probe,
                           const IsotonicModel<double> &iso,
                           const TransferFunction &tf,
                           const ActivationDataset &test_ds);

// File formats.
void save_steering_vector(const std::filesystem::path &path, const SteeringVector &sv);
SteeringVector load_steering_vector(const std::filesystem::path &path);

void save_plan(const std::filesystem::path &path, const SteeringPlan &plan);
SteeringPlan load_plan(const std::filesystem::path &path);

void save_transfer(const std::filesystem::path &path, const TransferFunction &tf);
/// Refits from stored knots, so a flat file raises FlatTransferError.
TransferFunction load_transfer(const std::filesystem::path &path);

/// Long-format sweep CSV with columns alpha,question_id,confidence.
std::vector<SweepPoint> load_sweep(const std::filesystem::path &path);

void save_isotonic(const std::filesystem::path &path, const IsotonicModel<double> &iso);

} // namespace confsteer
