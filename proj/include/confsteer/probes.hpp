#pragma once

#include "confsteer/activation_store.hpp"
#include "confsteer/numerics/ridge.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace confsteer {

enum class ProbeTarget { empirical_accuracy, binary_correct, verbalized_confidence };

std::string_view to_string(ProbeTarget t);
ProbeTarget parse_probe_target(std::string_view s);

struct ProbeOptions {
  //! Map empirical accuracy to the midpoint of its decile bin.
  bool binned_accuracy = false;
  //! Fit on z-scored features (weights are mapped back to raw feature space).
  bool standardize = false;
};

/// The regression target a row supplies for `target`, if the field exists.
std::optional<double> probe_target_value(const RowMeta &row, ProbeTarget target,
                                         const ProbeOptions &options = {});

/// Rows of each split that carry the target, with their target values.
struct TargetRows {
  std::vector<std::size_t> train, val, test;
  VectorXd y_train, y_val, y_test;
  std::size_t excluded = 0;
};

TargetRows collect_target_rows(const ActivationDataset &ds, ProbeTarget target,
                               const ProbeOptions &options = {});

struct ProjectionStats {
  std::optional<double> cohens_d;
  bool cohens_d_degenerate = false;
  std::optional<double> pearson_r;
};

struct LayerProbeResult {
  int layer = 0;
  ProbeTarget target = ProbeTarget::empirical_accuracy;
  RidgeFit<double> fit;
  std::optional<ProjectionStats> projection_stats;
  std::size_t excluded_rows = 0;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t test_rows = 0;
};

/// Sweeps lambda on train/val, then scores the selected fit once on test.
LayerProbeResult fit_probe(const ActivationDataset &ds, ProbeTarget target,
                           const std::vector<double> &lambdas,
                           const ProbeOptions &options = {});

/// Raw linear scores X w + b (no clamping).
VectorXd probe_predict(const RidgeFit<double> &fit, const MatrixXd &X);

/// One probe per layer, ordered by layer index.
std::vector<LayerProbeResult>
layer_curve(const std::vector<ActivationDataset> &datasets, ProbeTarget target,
            const std::vector<double> &lambdas, const ProbeOptions &options = {});

struct ProbeFile {
  int layer = 0;
  std::optional<ProbeTarget> target;
  RidgeFit<double> fit;
};

/// JSON {layer, lambda, bias, r2_train, r2_val, r2_test, weights_b64}.
void save_probe(const std::filesystem::path &path, const LayerProbeResult &result);
ProbeFile load_probe(const std::filesystem::path &path);

} // namespace confsteer
