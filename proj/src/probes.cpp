#include "confsteer/probes.hpp"

#include "confsteer/codec.hpp"
#include "confsteer/numerics/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using nlohmann::json;

namespace confsteer {

std::string_view to_string(ProbeTarget t) {
  switch (t) {
  case ProbeTarget::empirical_accuracy:
    return "empirical_accuracy";
  case ProbeTarget::binary_correct:
    return "binary_correct";
  case ProbeTarget::verbalized_confidence:
    return "verbalized_confidence";
  }
  return "?";
}

ProbeTarget parse_probe_target(std::string_view s) {
  if (s == "empirical_accuracy")
    return ProbeTarget::empirical_accuracy;
  if (s == "binary_correct")
    return ProbeTarget::binary_correct;
  if (s == "verbalized_confidence")
    return ProbeTarget::verbalized_confidence;
  throw ValidationError("unknown probe target '" + std::string(s) + "'");
}

std::optional<double> probe_target_value(const RowMeta &row, ProbeTarget target,
                                         const ProbeOptions &options) {
  switch (target) {
  case ProbeTarget::empirical_accuracy:
    if (!row.empirical_accuracy)
      return std::nullopt;
    if (options.binned_accuracy) {
      const double bin = std::min(std::floor(*row.empirical_accuracy * 10.0), 9.0);
      return (bin + 0.5) / 10.0;
    }
    return row.empirical_accuracy;
  case ProbeTarget::binary_correct:
    if (!row.correct)
      return std::nullopt;
    return *row.correct ? 1.0 : 0.0;
  case ProbeTarget::verbalized_confidence:
    return row.verbalized_confidence;
  }
  return std::nullopt;
}

namespace {

struct SplitRows {
  std::vector<std::size_t> idx;
  VectorXd y;
};

SplitRows collect(const ActivationDataset &ds, Split split, ProbeTarget target,
                  const ProbeOptions &options, std::size_t &excluded) {
  SplitRows out;
  std::vector<double> ys;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.meta[i].split != split)
      continue;
    const auto v = probe_target_value(ds.meta[i], target, options);
    if (!v) {
      ++excluded;
      continue;
    }
    out.idx.push_back(i);
    ys.push_back(*v);
  }
  out.y = Eigen::Map<const VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return out;
}

ProjectionStats projection_stats(const ActivationDataset &ds,
                                 const std::vector<std::size_t> &rows,
                                 const VectorXd &weights) {
  ProjectionStats stats;
  const VectorXd proj = ds.features(rows) * weights;
  std::vector<double> pos, neg, acc_x, acc_y;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto &m = ds.meta[rows[k]];
    const double p = proj(static_cast<Eigen::Index>(k));
    if (m.correct)
      (*m.correct ? pos : neg).push_back(p);
    if (m.empirical_accuracy) {
      acc_x.push_back(p);
      acc_y.push_back(*m.empirical_accuracy);
    }
  }
  if (pos.size() >= 2 && neg.size() >= 2) {
    const auto es = cohens_d(Eigen::Map<const VectorXd>(pos.data(), static_cast<Eigen::Index>(pos.size())),
                             Eigen::Map<const VectorXd>(neg.data(), static_cast<Eigen::Index>(neg.size())));
    stats.cohens_d = es.d;
    stats.cohens_d_degenerate = es.degenerate;
  }
  if (acc_x.size() >= 2) {
    try {
      stats.pearson_r = pearson_r(
          Eigen::Map<const VectorXd>(acc_x.data(), static_cast<Eigen::Index>(acc_x.size())),
          Eigen::Map<const VectorXd>(acc_y.data(), static_cast<Eigen::Index>(acc_y.size())));
    } catch (const NumericalError &) {
      // zero variance: leave absent
    }
  }
  return stats;
}

} // namespace

TargetRows collect_target_rows(const ActivationDataset &ds, ProbeTarget target,
                               const ProbeOptions &options) {
  TargetRows out;
  auto train = collect(ds, Split::train, target, options, out.excluded);
  auto val = collect(ds, Split::val, target, options, out.excluded);
  auto test = collect(ds, Split::test, target, options, out.excluded);
  out.train = std::move(train.idx);
  out.y_train = std::move(train.y);
  out.val = std::move(val.idx);
  out.y_val = std::move(val.y);
  out.test = std::move(test.idx);
  out.y_test = std::move(test.y);
  return out;
}

VectorXd probe_predict(const RidgeFit<double> &fit, const MatrixXd &X) {
  return ridge_predict(fit, X);
}

LayerProbeResult fit_probe(const ActivationDataset &ds, ProbeTarget target,
                           const std::vector<double> &lambdas,
                           const ProbeOptions &options) {
  LayerProbeResult result;
  result.layer = ds.layer;
  result.target = target;

  std::size_t excluded = 0;
  const SplitRows train = collect(ds, Split::train, target, options, excluded);
  const SplitRows val = collect(ds, Split::val, target, options, excluded);
  const SplitRows test = collect(ds, Split::test, target, options, excluded);
  // Rows without any split are outside every partition and are not counted.
  result.excluded_rows = excluded;
  result.train_rows = train.idx.size();
  result.val_rows = val.idx.size();
  result.test_rows = test.idx.size();

  if (train.idx.empty() && val.idx.empty() && test.idx.empty()) {
    bool any_field = false;
    for (const auto &m : ds.meta)
      any_field |= probe_target_value(m, target, options).has_value();
    if (!any_field)
      throw ValidationError("dataset has no rows with field '" +
                            std::string(to_string(target)) + "'");
  }
  if (train.idx.size() < 2)
    throw ValidationError("probe: missing or too small train split (" +
                          std::to_string(train.idx.size()) + " rows with '" +
                          std::string(to_string(target)) + "')");
  if (val.idx.empty())
    throw ValidationError("probe: missing val split");
  if (std::set<double>(train.y.begin(), train.y.end()).size() < 2)
    throw ValidationError("probe: fewer than 2 distinct target values in train");

  MatrixXd X_train = ds.features(train.idx);
  MatrixXd X_val = ds.features(val.idx);
  VectorXd scale = VectorXd::Ones(ds.dim());
  VectorXd shift = VectorXd::Zero(ds.dim());
  if (options.standardize) {
    shift = X_train.colwise().mean().transpose();
    scale = ((X_train.rowwise() - shift.transpose()).array().square().colwise().sum() /
             static_cast<double>(X_train.rows()))
                .sqrt()
                .transpose();
    scale = scale.unaryExpr([](double s) { return s > 0 ? s : 1.0; });
    auto z = [&](const MatrixXd &X) {
      return MatrixXd((X.rowwise() - shift.transpose()).array().rowwise() /
                      scale.transpose().array());
    };
    X_train = z(X_train);
    X_val = z(X_val);
  }

  RidgeFit<double> fit = sweep_ridge(X_train, train.y, X_val, val.y, lambdas);
  if (options.standardize) {
    fit.weights = fit.weights.cwiseQuotient(scale);
    fit.bias -= shift.dot(fit.weights);
  }
  result.fit = std::move(fit);

  if (!test.idx.empty()) {
    result.fit.r2_test =
        r_squared(test.y, probe_predict(result.fit, ds.features(test.idx)));
    if (target != ProbeTarget::verbalized_confidence)
      result.projection_stats = projection_stats(ds, test.idx, result.fit.weights);
  }
  return result;
}

std::vector<LayerProbeResult>
layer_curve(const std::vector<ActivationDataset> &datasets, ProbeTarget target,
            const std::vector<double> &lambdas, const ProbeOptions &options) {
  if (datasets.empty())
    return {};
  for (const auto &ds : datasets)
    if (ds.model_id != datasets.front().model_id ||
        ds.condition != datasets.front().condition ||
        ds.position != datasets.front().position)
      throw ValidationError(
          "layer_curve: datasets must share model, condition and position");
  std::vector<LayerProbeResult> results;
  results.reserve(datasets.size());
  for (const auto &ds : datasets)
    results.push_back(fit_probe(ds, target, lambdas, options));
  std::stable_sort(results.begin(), results.end(),
                   [](const auto &a, const auto &b) { return a.layer < b.layer; });
  return results;
}

void save_probe(const std::filesystem::path &path, const LayerProbeResult &r) {
  json j;
  j["layer"] = r.layer;
  j["target"] = std::string(to_string(r.target));
  j["lambda"] = r.fit.lambda;
  j["bias"] = r.fit.bias;
  j["r2_train"] = r.fit.r2_train;
  j["r2_val"] = r.fit.r2_val ? json(*r.fit.r2_val) : json(nullptr);
  j["r2_test"] = r.fit.r2_test ? json(*r.fit.r2_test) : json(nullptr);
  j["dim"] = r.fit.weights.size();
  j["weights_b64"] = encode_f32(r.fit.weights);
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write probe file '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

ProbeFile load_probe(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open probe file '" + path.string() + "'");
  ProbeFile p;
  try {
    const json j = json::parse(in);
    p.layer = j.at("layer").get<int>();
    if (j.contains("target") && !j["target"].is_null())
      p.target = parse_probe_target(j["target"].get<std::string>());
    p.fit.lambda = j.at("lambda").get<double>();
    p.fit.bias = j.at("bias").get<double>();
    p.fit.r2_train = j.at("r2_train").get<double>();
    if (j.contains("r2_val") && !j["r2_val"].is_null())
      p.fit.r2_val = j["r2_val"].get<double>();
    if (j.contains("r2_test") && !j["r2_test"].is_null())
      p.fit.r2_test = j["r2_test"].get<double>();
    p.fit.weights = decode_f32(j.at("weights_b64").get<std::string>());
  } catch (const json::exception &e) {
    throw ValidationError("malformed probe file '" + path.string() + "': " + e.what());
  }
  return p;
}

} // namespace confsteer
