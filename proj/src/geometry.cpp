#include "confsteer/geometry.hpp"

#include "confsteer/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace confsteer {

double weight_cosine(const VectorXd &w1, const VectorXd &w2) {
  if (w1.size() != w2.size())
    throw ValidationError("weight_cosine: dimension mismatch (" +
                          std::to_string(w1.size()) + " vs " +
                          std::to_string(w2.size()) + ")");
  const double n1 = w1.norm(), n2 = w2.norm();
  if (n1 == 0.0 || n2 == 0.0)
    throw ValidationError("weight_cosine: zero vector");
  return std::clamp(w1.dot(w2) / (n1 * n2), -1.0, 1.0);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty())
    throw ValidationError("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

VectorXd group_contrast(const ActivationDataset &ds, ContrastLabel label,
                        double hi_q, double lo_q) {
  if (!(lo_q >= 0.0 && hi_q <= 1.0 && lo_q < hi_q))
    throw ValidationError("group_contrast: need 0 <= lo_q < hi_q <= 1");
  std::vector<std::size_t> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &m = ds.meta[i];
    const auto v = label == ContrastLabel::verbalized_confidence ? m.verbalized_confidence
                                                                 : m.empirical_accuracy;
    if (v) {
      rows.push_back(i);
      labels.push_back(*v);
    }
  }
  if (rows.empty())
    throw ValidationError("group_contrast: no rows carry the label");
  const double hi_t = quantile(labels, hi_q);
  const double lo_t = quantile(labels, lo_q);
  if (!(hi_t > lo_t))
    throw ValidationError("group_contrast: degenerate label quantiles (labels do not vary)");

  VectorXd hi_sum = VectorXd::Zero(ds.dim()), lo_sum = VectorXd::Zero(ds.dim());
  std::size_t n_hi = 0, n_lo = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = ds.rows.row(static_cast<Eigen::Index>(rows[k])).cast<double>().transpose();
    if (labels[k] >= hi_t) {
      hi_sum += row;
      ++n_hi;
    }
    if (labels[k] <= lo_t) {
      lo_sum += row;
      ++n_lo;
    }
  }
  if (n_hi == 0 || n_lo == 0)
    throw ValidationError("group_contrast: empty high or low group");
  return hi_sum / static_cast<double>(n_hi) - lo_sum / static_cast<double>(n_lo);
}

std::vector<ContaminationPoint>
contamination_curve(const std::vector<ActivationDataset> &pure_by_layer,
                    const std::vector<ActivationDataset> &joint_by_layer,
                    double hi_q, double lo_q) {
  std::vector<ContaminationPoint> out;
  for (const auto &pure : pure_by_layer) {
    const auto joint = std::find_if(joint_by_layer.begin(), joint_by_layer.end(),
                                    [&](const auto &j) { return j.layer == pure.layer; });
    if (joint == joint_by_layer.end())
      throw ValidationError("contamination_curve: no joint dataset for layer " +
                            std::to_string(pure.layer));
    auto cos_for = [&](const ActivationDataset &ds) {
      return weight_cosine(group_contrast(ds, ContrastLabel::verbalized_confidence, hi_q, lo_q),
                           group_contrast(ds, ContrastLabel::empirical_accuracy, hi_q, lo_q));
    };
    out.push_back({pure.layer, cos_for(pure), cos_for(*joint)});
  }
  std::sort(out.begin(), out.end(),
            [](const auto &a, const auto &b) { return a.layer < b.layer; });
  return out;
}

namespace {

/// Modified Gram-Schmidt over rows, applied twice for orthonormality to
/// working precision. Returns false if a row collapses.
bool orthonormalize_rows(MatrixXd &m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double original = m.row(i).norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < i; ++j)
        m.row(i) -= m.row(i).dot(m.row(j)) * m.row(j);
    const double n = m.row(i).norm();
    if (!(n > 1e-10 * std::max(original, 1.0)))
      return false;
    m.row(i) /= n;
  }
  return true;
}

MatrixXd deflate(const MatrixXd &Z, const VectorXd &unit) {
  return Z - (Z * unit) * unit.transpose();
}

struct AnalysisRows {
  TargetRows rows;
  MatrixXd z_train, z_val, z_test;
};

AnalysisRows project_rows(const ActivationDataset &ds, ProbeTarget target,
                          const PcaModel<double> &pca) {
  AnalysisRows a;
  a.rows = collect_target_rows(ds, target);
  if (a.rows.train.size() < 2 || a.rows.val.empty())
    throw ValidationError("subspace analysis needs train and val rows with '" +
                          std::string(to_string(target)) + "'");
  a.z_train = pca.project(ds.features(a.rows.train));
  a.z_val = pca.project(ds.features(a.rows.val));
  a.z_test = pca.project(ds.features(a.rows.test));
  return a;
}

double test_r2(const MatrixXd &z_train, const VectorXd &y_train, const MatrixXd &z_val,
               const VectorXd &y_val, const MatrixXd &z_test, const VectorXd &y_test,
               const std::vector<double> &lambdas) {
  if (z_test.rows() == 0)
    throw ValidationError("subspace analysis needs test rows");
  const auto fit = sweep_ridge(z_train, y_train, z_val, y_val, lambdas);
  return r_squared(y_test, ridge_predict(fit, z_test));
}

} // namespace

Subspace extract_subspace(const ActivationDataset &ds, ProbeTarget target, Eigen::Index k,
                          Eigen::Index pca_dim, const std::vector<double> &lambdas) {
  if (k < 1)
    throw ValidationError("extract_subspace: k must be >= 1");
  const auto train_all = ds.indices_in(Split::train);
  if (pca_dim < 1 || pca_dim > ds.dim() ||
      pca_dim > static_cast<Eigen::Index>(train_all.size()))
    throw ValidationError("extract_subspace: pca_dim " + std::to_string(pca_dim) +
                          " exceeds feature count or train rows");
  if (k > pca_dim)
    throw NumericalError("extract_subspace: rank exhausted (k > pca_dim)");

  Subspace s;
  s.layer = ds.layer;
  s.source_target = target;
  s.pca = pca_fit(ds.features(train_all), pca_dim);

  AnalysisRows a = project_rows(ds, target, s.pca);
  auto centered_norm = [](const MatrixXd &z) {
    return (z.rowwise() - z.colwise().mean()).norm();
  };
  const double energy0 = centered_norm(a.z_train);
  s.basis.resize(k, pca_dim);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto fit = sweep_ridge(a.z_train, a.rows.y_train, a.z_val, a.rows.y_val, lambdas);
    const double n = fit.weights.norm();
    if (!(n > 0) || !std::isfinite(n) || !(centered_norm(a.z_train) > 1e-10 * energy0))
      throw NumericalError("extract_subspace: rank exhausted after " + std::to_string(i) +
                           " directions");
    const VectorXd unit = fit.weights / n;
    s.basis.row(i) = unit.transpose();
    a.z_train = deflate(a.z_train, unit);
    a.z_val = deflate(a.z_val, unit);
  }
  if (!orthonormalize_rows(s.basis))
    throw NumericalError("extract_subspace: deflated directions are linearly dependent");
  return s;
}

std::vector<double> principal_angles(const MatrixXd &basis_a, const MatrixXd &basis_b) {
  if (basis_a.cols() != basis_b.cols())
    throw ValidationError("principal_angles: feature dimensions differ");
  const MatrixXd m = basis_a * basis_b.transpose();
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd sv = svd.singularValues();
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    angles.push_back(std::acos(std::clamp(sv(i), 0.0, 1.0)) * 180.0 / std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  return angles;
}

std::vector<double> principal_angles(const Subspace &a, const Subspace &b) {
  return principal_angles(a.basis, b.basis);
}

namespace {

MatrixXd random_orthonormal_rows(Eigen::Index k, Eigen::Index ambient, Xoshiro256 &rng) {
  MatrixXd g(ambient, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < ambient; ++i)
      g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(ambient, k);
  return q.transpose();
}

} // namespace

AngleBaseline random_angle_baseline(Eigen::Index k, Eigen::Index ambient, int trials,
                                    std::uint64_t seed) {
  if (k < 1 || k > ambient)
    throw ValidationError("random_angle_baseline: need 1 <= k <= ambient");
  if (trials < 2)
    throw ValidationError("random_angle_baseline: need at least 2 trials");
  Xoshiro256 rng(seed);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const MatrixXd a = random_orthonormal_rows(k, ambient, rng);
    const MatrixXd b = random_orthonormal_rows(k, ambient, rng);
    const auto angles = principal_angles(a, b);
    means.push_back(std::accumulate(angles.begin(), angles.end(), 0.0) /
                    static_cast<double>(angles.size()));
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) /
                      static_cast<double>(means.size());
  double ss = 0;
  for (double m : means)
    ss += (m - mean) * (m - mean);
  const double sd = std::sqrt(ss / static_cast<double>(means.size() - 1));
  return {mean, 2.0 * sd};
}

namespace {

MatrixXd inverse_sqrt(const MatrixXd &s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  const VectorXd ev = eig.eigenvalues().cwiseMax(std::numeric_limits<double>::min());
  return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

MatrixXd regularized_cov(const MatrixXd &xc, double reg) {
  MatrixXd s = xc.transpose() * xc / static_cast<double>(xc.rows() - 1);
  const double tr = s.trace();
  const double ridge = reg * (tr > 0 ? tr / static_cast<double>(s.rows()) : 1.0);
  s.diagonal().array() += ridge;
  return s;
}

} // namespace

VectorXd canonical_correlations(const MatrixXd &a, const MatrixXd &b, double reg) {
  if (a.rows() != b.rows() || a.rows() < 2)
    throw ValidationError("canonical_correlations: need matching row counts >= 2");
  const MatrixXd ac = a.rowwise() - a.colwise().mean();
  const MatrixXd bc = b.rowwise() - b.colwise().mean();
  const MatrixXd sab = ac.transpose() * bc / static_cast<double>(a.rows() - 1);
  const MatrixXd k = inverse_sqrt(regularized_cov(ac, reg)) * sab *
                     inverse_sqrt(regularized_cov(bc, reg));
  Eigen::JacobiSVD<MatrixXd> svd(k);
  return svd.singularValues().cwiseMax(0.0).cwiseMin(1.0);
}

VectorXd cca_top(const ActivationDataset &ds, const Subspace &a, const Subspace &b,
                 Eigen::Index m) {
  if (m < 1 || m > a.rank() || m > b.rank())
    throw ValidationError("cca_top: m must be in [1, min subspace rank]");
  if (a.feature_dim() != b.feature_dim())
    throw ValidationError("cca_top: subspaces live in different feature spaces");
  const auto test = ds.indices_in(Split::test);
  if (static_cast<Eigen::Index>(test.size()) < 2 * m)
    throw ValidationError("cca_top: need at least 2m test rows, have " +
                          std::to_string(test.size()));
  const MatrixXd x = ds.features(test);
  const MatrixXd pa = a.pca.project(x) * a.basis.topRows(m).transpose();
  const MatrixXd pb = b.pca.project(x) * b.basis.topRows(m).transpose();
  return canonical_correlations(pa, pb);
}

Retention removal_retention(const ActivationDataset &ds, ProbeTarget target,
                            const Subspace &removed, const std::vector<double> &lambdas) {
  const AnalysisRows a = project_rows(ds, target, removed.pca);
  Retention r;
  r.r2_before = test_r2(a.z_train, a.rows.y_train, a.z_val, a.rows.y_val, a.z_test,
                        a.rows.y_test, lambdas);
  const Eigen::Index dim = removed.feature_dim();
  const MatrixXd keep = MatrixXd::Identity(dim, dim) - removed.basis.transpose() * removed.basis;
  r.r2_after = test_r2(a.z_train * keep, a.rows.y_train, a.z_val * keep, a.rows.y_val,
                       a.z_test * keep, a.rows.y_test, lambdas);
  if (r.r2_before > 0)
    r.ratio = r.r2_after / r.r2_before;
  return r;
}

VarianceSplit variance_decomposition(const ActivationDataset &ds, ProbeTarget target,
                                     const Subspace &own, const Subspace &other,
                                     const std::vector<double> &lambdas) {
  if (own.feature_dim() != other.feature_dim())
    throw ValidationError("variance_decomposition: subspaces live in different spaces");
  const AnalysisRows a = project_rows(ds, target, own.pca);
  auto r2_on = [&](const MatrixXd &basis) {
    const MatrixXd bt = basis.transpose();
    return test_r2(a.z_train * bt, a.rows.y_train, a.z_val * bt, a.rows.y_val,
                   a.z_test * bt, a.rows.y_test, lambdas);
  };
  VarianceSplit v;
  v.full = r2_on(own.basis);
  v.shared = r2_on(other.basis);
  v.unique = std::max(v.full - v.shared, 0.0);
  return v;
}

SubspaceReport subspace_report(const ActivationDataset &ds, const SubspaceReportOptions &opt) {
  SubspaceReport rep;
  rep.layer = ds.layer;
  const auto n_train = static_cast<Eigen::Index>(ds.indices_in(Split::train).size());
  rep.pca_dim = std::min({opt.pca_dim, ds.dim(), n_train});
  rep.k = std::min(opt.k, rep.pca_dim);
  const Eigen::Index m = std::min(opt.cca_dim, rep.k);

  const Subspace a = extract_subspace(ds, ProbeTarget::empirical_accuracy, rep.k, rep.pca_dim,
                                      opt.lambdas);
  const Subspace b = extract_subspace(ds, ProbeTarget::verbalized_confidence, rep.k,
                                      rep.pca_dim, opt.lambdas);
  const auto angles = principal_angles(a, b);
  rep.mean_principal_angle_deg =
      std::accumulate(angles.begin(), angles.end(), 0.0) / static_cast<double>(angles.size());
  rep.min_principal_angle_deg = angles.front();
  rep.random_baseline = random_angle_baseline(rep.k, rep.pca_dim, opt.baseline_trials, opt.seed);
  rep.cca_correlations = cca_top(ds, a, b, m);
  rep.a_given_b_removed = removal_retention(ds, ProbeTarget::empirical_accuracy, b, opt.lambdas);
  rep.b_given_a_removed = removal_retention(ds, ProbeTarget::verbalized_confidence, a, opt.lambdas);
  rep.a_self_removed = removal_retention(ds, ProbeTarget::empirical_accuracy, a, opt.lambdas);
  rep.b_self_removed = removal_retention(ds, ProbeTarget::verbalized_confidence, b, opt.lambdas);
  rep.variance_a = variance_decomposition(ds, ProbeTarget::empirical_accuracy, a, b, opt.lambdas);
  rep.variance_b =
      variance_decomposition(ds, ProbeTarget::verbalized_confidence, b, a, opt.lambdas);
  for (const auto *r : {&rep.a_given_b_removed, &rep.b_given_a_removed, &rep.a_self_removed,
                        &rep.b_self_removed})
    rep.retention_flag |= r->ratio && *r->ratio > 1.1;
  return rep;
}

} // namespace confsteer
