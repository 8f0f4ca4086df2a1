#include "confsteer/steering.hpp"

#include "confsteer/codec.hpp"
#include "confsteer/csv.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

using nlohmann::json;

namespace confsteer {

SteeringVector build_caa(const ActivationDataset &ds, double tau_hi, double tau_lo) {
  if (!(tau_lo >= 0.0 && tau_hi <= 1.0 && tau_lo < tau_hi))
    throw ValidationError("build_caa: need 0 <= tau_lo < tau_hi <= 1");
  if (ds.size() == 0)
    throw ValidationError("build_caa: empty dataset");

  struct Sides {
    VectorXd hi_sum, lo_sum;
    std::size_t hi = 0, lo = 0;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Sides> groups;
  const Eigen::Index d = ds.dim();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &m = ds.meta[i];
    auto [it, inserted] = groups.try_emplace(m.question_id);
    if (inserted) {
      order.push_back(m.question_id);
      it->second.hi_sum = VectorXd::Zero(d);
      it->second.lo_sum = VectorXd::Zero(d);
    }
    if (!m.verbalized_confidence)
      continue;
    const auto row = ds.rows.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
    if (*m.verbalized_confidence > tau_hi) {
      it->second.hi_sum += row;
      ++it->second.hi;
    } else if (*m.verbalized_confidence < tau_lo) {
      it->second.lo_sum += row;
      ++it->second.lo;
    }
  }

  SteeringVector sv;
  sv.layer = ds.layer;
  sv.tau_hi = tau_hi;
  sv.tau_lo = tau_lo;
  sv.raw = VectorXd::Zero(d);
  for (const auto &q : order) {
    const Sides &s = groups.at(q);
    if (s.hi == 0 || s.lo == 0) {
      ++sv.skipped_questions;
      continue;
    }
    sv.raw += s.hi_sum / static_cast<double>(s.hi) - s.lo_sum / static_cast<double>(s.lo);
    ++sv.num_questions;
  }
  if (sv.num_questions == 0)
    throw ValidationError("build_caa: no question has rows both above tau_hi=" +
                          format_double(tau_hi) + " and below tau_lo=" +
                          format_double(tau_lo));
  sv.raw /= static_cast<double>(sv.num_questions);

  double norm_sum = 0;
  for (Eigen::Index i = 0; i < ds.rows.rows(); ++i)
    norm_sum += ds.rows.row(i).cast<double>().norm();
  sv.mean_activation_norm = norm_sum / static_cast<double>(ds.rows.rows());
  return sv;
}

VectorXd prepare_direction(const SteeringVector &sv) {
  const double n = sv.raw.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw ValidationError("prepare_direction: steering vector is zero");
  return sv.raw / n * sv.mean_activation_norm;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = -20; i <= 20; ++i)
    grid.push_back(static_cast<double>(i) / 10.0);
  return grid;
}

std::vector<double> coarse_alpha_grid() {
  return {-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75};
}

TransferFunction fit_transfer(std::vector<SweepPoint> sweep) {
  std::map<double, std::vector<double>> by_alpha;
  for (const auto &p : sweep) {
    if (!std::isfinite(p.alpha))
      throw ValidationError("fit_transfer: non-finite alpha");
    if (p.confidences.size() == 0)
      throw ValidationError("fit_transfer: alpha " + format_double(p.alpha) +
                            " has no confidences");
    auto &dst = by_alpha[p.alpha];
    dst.insert(dst.end(), p.confidences.begin(), p.confidences.end());
  }
  if (by_alpha.size() < 2)
    throw ValidationError("fit_transfer: need at least 2 distinct alphas");

  std::vector<double> alphas, means;
  for (const auto &[alpha, conf] : by_alpha) {
    double s = 0;
    for (double c : conf)
      s += c;
    alphas.push_back(alpha);
    means.push_back(s / static_cast<double>(conf.size()));
  }
  const std::vector<double> smooth = pava(means);

  TransferFunction tf;
  for (std::size_t i = 0; i < smooth.size();) {
    std::size_t j = i;
    while (j + 1 < smooth.size() && smooth[j + 1] == smooth[i])
      ++j;
    tf.knots.push_back({(alphas[i] + alphas[j]) / 2.0, smooth[i]});
    i = j + 1;
  }
  if (tf.knots.size() < 2)
    throw FlatTransferError("flat transfer: steering does not change mean confidence");
  const double rise = tf.knots.back().mean_confidence - tf.knots.front().mean_confidence;
  if (rise < kMinTransferRise)
    throw FlatTransferError("flat transfer: mean confidence rises by only " +
                            format_double(rise) + " across the sweep");

  std::vector<double> kx, ky;
  for (const auto &k : tf.knots) {
    kx.push_back(k.alpha);
    ky.push_back(k.mean_confidence);
  }
  tf.interpolant = monotone_interp_fit(std::move(kx), std::move(ky));
  tf.alpha_range = {tf.knots.front().alpha, tf.knots.back().alpha};
  return tf;
}

std::vector<std::pair<std::string, double>>
question_probe_scores(const RidgeFit<double> &probe, const ActivationDataset &ds) {
  if (ds.dim() != probe.weights.size())
    throw ValidationError("probe dimension " + std::to_string(probe.weights.size()) +
                          " does not match dataset dimension " +
                          std::to_string(ds.dim()));
  const VectorXd scores = ridge_predict(probe, ds.rows);
  std::vector<std::pair<std::string, double>> out;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> index; // slot, count
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &q = ds.meta[i].question_id;
    auto [it, inserted] = index.try_emplace(q, out.size(), 0);
    if (inserted)
      out.emplace_back(q, 0.0);
    out[it->second.first].second += scores(static_cast<Eigen::Index>(i));
    ++it->second.second;
  }
  for (auto &[q, s] : out)
    s /= static_cast<double>(index.at(q).second);
  return out;
}

IsotonicModel<double> calibrate_probe(const RidgeFit<double> &probe,
                                      const ActivationDataset &val_ds) {
  const auto scores = question_probe_scores(probe, val_ds);
  std::unordered_map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto &m : val_ds.meta)
    if (m.empirical_accuracy) {
      auto &a = acc[m.question_id];
      a.first += *m.empirical_accuracy;
      ++a.second;
    }
  std::vector<double> xs, ys;
  for (const auto &[q, s] : scores) {
    const auto it = acc.find(q);
    if (it == acc.end())
      continue;
    xs.push_back(s);
    ys.push_back(it->second.first / static_cast<double>(it->second.second));
  }
  if (xs.empty())
    throw ValidationError("calibrate_probe: no validation rows carry empirical_accuracy");
  return isotonic_fit(Eigen::Map<const VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                      Eigen::Map<const VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
}

SteeringPlan plan_adaptive(const RidgeFit<double> &probe, const IsotonicModel<double> &iso,
                           const TransferFunction &tf, const ActivationDataset &test_ds) {
  if (test_ds.size() == 0)
    throw ValidationError("plan_adaptive: empty test set");
  if (tf.interpolant.knot_x.size() < 2)
    throw ValidationError("plan_adaptive: transfer function has no knots");
  SteeringPlan plan;
  for (const auto &[q, raw] : question_probe_scores(probe, test_ds)) {
    PlanEntry e;
    e.question_id = q;
    e.probe_raw = raw;
    e.target_confidence = std::clamp(iso(raw), 0.0, 1.0);
    const auto inv = monotone_interp_invert(tf.interpolant, e.target_confidence);
    e.alpha_star = inv.x;
    e.clamped = inv.clamped;
    plan.entries.push_back(std::move(e));
  }
  return plan;
}

void save_steering_vector(const std::filesystem::path &path, const SteeringVector &sv) {
  json j;
  j["layer"] = sv.layer;
  j["dim"] = sv.raw.size();
  j["tau_hi"] = sv.tau_hi;
  j["tau_lo"] = sv.tau_lo;
  j["num_questions"] = sv.num_questions;
  j["mean_activation_norm"] = sv.mean_activation_norm;
  j["vector_b64"] = encode_f32(sv.raw);
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write steering vector '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

SteeringVector load_steering_vector(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open steering vector '" + path.string() + "'");
  SteeringVector sv;
  try {
    const json j = json::parse(in);
    sv.layer = j.at("layer").get<int>();
    sv.tau_hi = j.at("tau_hi").get<double>();
    sv.tau_lo = j.at("tau_lo").get<double>();
    sv.num_questions = j.at("num_questions").get<std::size_t>();
    sv.mean_activation_norm = j.at("mean_activation_norm").get<double>();
    sv.raw = decode_f32(j.at("vector_b64").get<std::string>());
    if (sv.raw.size() != j.at("dim").get<Eigen::Index>())
      throw ValidationError("steering vector dim does not match payload");
  } catch (const json::exception &e) {
    throw ValidationError("malformed steering vector '" + path.string() + "': " + e.what());
  }
  return sv;
}

void save_plan(const std::filesystem::path &path, const SteeringPlan &plan) {
  CsvTable t;
  t.header = {"question_id", "probe_raw", "target_confidence", "alpha_star", "clamped"};
  for (const auto &e : plan.entries)
    t.rows.push_back({e.question_id, format_double(e.probe_raw),
                      format_double(e.target_confidence), format_double(e.alpha_star),
                      e.clamped ? "1" : "0"});
  write_csv(path, t);
}

SteeringPlan load_plan(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const auto q = t.require_column("question_id");
  const auto p = t.require_column("probe_raw");
  const auto c = t.require_column("target_confidence");
  const auto a = t.require_column("alpha_star");
  const auto k = t.require_column("clamped");
  SteeringPlan plan;
  for (const auto &r : t.rows) {
    PlanEntry e;
    e.question_id = r[q];
    e.probe_raw = parse_double_cell(r[p], "probe_raw");
    e.target_confidence = parse_double_cell(r[c], "target_confidence");
    e.alpha_star = parse_double_cell(r[a], "alpha_star");
    if (r[k] != "0" && r[k] != "1")
      throw ValidationError("clamped must be 0 or 1, got '" + r[k] + "'");
    e.clamped = r[k] == "1";
    plan.entries.push_back(std::move(e));
  }
  return plan;
}

void save_transfer(const std::filesystem::path &path, const TransferFunction &tf) {
  CsvTable t;
  t.header = {"alpha", "mean_confidence"};
  for (const auto &k : tf.knots)
    t.rows.push_back({format_double(k.alpha), format_double(k.mean_confidence)});
  write_csv(path, t);
}

TransferFunction load_transfer(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const auto a = t.require_column("alpha");
  const auto m = t.require_column("mean_confidence");
  std::vector<SweepPoint> sweep;
  for (const auto &r : t.rows) {
    SweepPoint p;
    p.alpha = parse_double_cell(r[a], "alpha");
    p.confidences = VectorXd::Constant(1, parse_double_cell(r[m], "mean_confidence"));
    sweep.push_back(std::move(p));
  }
  return fit_transfer(std::move(sweep));
}

std::vector<SweepPoint> load_sweep(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const auto a = t.require_column("alpha");
  const auto q = t.require_column("question_id");
  const auto c = t.require_column("confidence");
  // alpha -> question -> (sum, count); samples of one question are averaged.
  std::map<double, std::map<std::string, std::pair<double, std::size_t>>> acc;
  for (const auto &r : t.rows) {
    if (r[c].empty())
      continue; // unparseable confidence upstream
    const double conf = parse_double_cell(r[c], "confidence");
    if (!(conf >= 0.0 && conf <= 1.0))
      throw ValidationError("sweep confidence outside [0,1]: " + r[c]);
    auto &slot = acc[parse_double_cell(r[a], "alpha")][r[q]];
    slot.first += conf;
    ++slot.second;
  }
  std::vector<SweepPoint> sweep;
  for (const auto &[alpha, qs] : acc) {
    SweepPoint p;
    p.alpha = alpha;
    p.confidences.resize(static_cast<Eigen::Index>(qs.size()));
    Eigen::Index i = 0;
    for (const auto &[id, s] : qs)
      p.confidences(i++) = s.first / static_cast<double>(s.second);
    sweep.push_back(std::move(p));
  }
  return sweep;
}

void save_isotonic(const std::filesystem::path &path, const IsotonicModel<double> &iso) {
  CsvTable t;
  t.header = {"probe_raw", "calibrated"};
  for (std::size_t i = 0; i < iso.knot_x.size(); ++i)
    t.rows.push_back({format_double(iso.knot_x[i]), format_double(iso.knot_y[i])});
  write_csv(path, t);
}

} // namespace confsteer
