#pragma once

#include "confsteer/activation_store.hpp"
#include "confsteer/numerics/pca.hpp"
#include "confsteer/probes.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace confsteer {

double weight_cosine(const VectorXd &w1, const VectorXd &w2);

enum class ContrastLabel { verbalized_confidence, empirical_accuracy };

/// Linear-interpolated sample quantile (the "type 7" definition).
double quantile(std::vector<double> values, double q);

/// Group-level contrast: mean of rows whose label is at or above the hi_q
/// quantile minus the mean of rows at or below the lo_q quantile.
VectorXd group_contrast(const ActivationDataset &ds, ContrastLabel label,
                        double hi_q = 0.75, double lo_q = 0.25);

struct ContaminationPoint {
  int layer = 0;
  double cos_pure = 0;
  double cos_joint = 0;
};

/// Per layer, cosine between the confidence and accuracy group contrasts under
/// each prompt condition. Layers are paired by layer index.
std::vector<ContaminationPoint>
contamination_curve(const std::vector<ActivationDataset> &pure_by_layer,
                    const std::vector<ActivationDataset> &joint_by_layer,
                    double hi_q = 0.75, double lo_q = 0.25);

/// Orthonormal predictive directions in a PCA-reduced feature space. The PCA
/// (fit on the train split) travels with the basis so other analyses can map
/// raw activations into the same space.
struct Subspace {
  MatrixXd basis; // k x feature_dim, orthonormal rows
  ProbeTarget source_target = ProbeTarget::empirical_accuracy;
  int layer = 0;
  PcaModel<double> pca;

  Eigen::Index feature_dim() const { return basis.cols(); }
  Eigen::Index rank() const { return basis.rows(); }
};

/// Iterative ridge with deflation: fit, record the unit weight direction,
/// project it out of the features, repeat k times, then re-orthonormalize.
Subspace extract_subspace(const ActivationDataset &ds, ProbeTarget target,
                          Eigen::Index k, Eigen::Index pca_dim,
                          const std::vector<double> &lambdas = default_lambda_grid());

/// Principal angles in degrees, ascending.
std::vector<double> principal_angles(const MatrixXd &basis_a, const MatrixXd &basis_b);
std::vector<double> principal_angles(const Subspace &a, const Subspace &b);

struct AngleBaseline {
  double mean_deg = 0;
  double two_sigma_deg = 0;
};

/// Mean principal angle between pairs of Haar-random k-dim subspaces of
/// R^ambient: mean over trials and twice the sample standard deviation.
AngleBaseline random_angle_baseline(Eigen::Index k, Eigen::Index ambient,
                                    int trials, std::uint64_t seed);

/// Canonical correlations (descending) between the columns of two data
/// matrices with matching row counts. Covariances get a ridge of
/// reg * trace / dim on the diagonal.
VectorXd canonical_correlations(const MatrixXd &a, const MatrixXd &b, double reg = 1e-8);

/// CCA of the test rows projected onto the first m directions of each subspace.
VectorXd cca_top(const ActivationDataset &ds, const Subspace &a, const Subspace &b,
                 Eigen::Index m);

struct Retention {
  std::optional<double> ratio; // absent when r2_before <= 0
  double r2_before = 0;
  double r2_after = 0;
};

/// Test R^2 of a probe for `target` before and after projecting `removed` out
/// of the (shared) PCA features.
Retention removal_retention(const ActivationDataset &ds, ProbeTarget target,
                            const Subspace &removed,
                            const std::vector<double> &lambdas = default_lambda_grid());

struct VarianceSplit {
  double full = 0;
  double shared = 0;
  double unique = 0;
};

/// shared = test R^2 predicting `target` from projections onto `other` only;
/// full = from projections onto `own`; unique = max(full - shared, 0).
VarianceSplit variance_decomposition(const ActivationDataset &ds, ProbeTarget target,
                                     const Subspace &own, const Subspace &other,
                                     const std::vector<double> &lambdas = default_lambda_grid());

struct SubspaceReportOptions {
  Eigen::Index k = 10;
  Eigen::Index pca_dim = 200;
  Eigen::Index cca_dim = 5;
  int baseline_trials = 1000;
  std::uint64_t seed = 0;
  std::vector<double> lambdas = default_lambda_grid();
};

/// All subspace analyses for one layer. Concept A is gold calibration
/// (empirical accuracy), concept B is verbalized confidence.
struct SubspaceReport {
  int layer = 0;
  Eigen::Index k = 0;
  Eigen::Index pca_dim = 0;
  double mean_principal_angle_deg = 0;
  double min_principal_angle_deg = 0;
  AngleBaseline random_baseline;
  VectorXd cca_correlations;
  Retention a_given_b_removed, b_given_a_removed;
  Retention a_self_removed, b_self_removed;
  VarianceSplit variance_a, variance_b;
  //! Some retention ratio exceeds 1.1 (noise-driven gain).
  bool retention_flag = false;
};

/// Runs every analysis on a dataset carrying both labels. pca_dim and k are
/// clamped to what the train split supports; the effective values are
/// recorded in the report.
SubspaceReport subspace_report(const ActivationDataset &ds,
                               const SubspaceReportOptions &options = {});

} // namespace confsteer
