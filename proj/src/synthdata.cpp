#include "confsteer/synthdata.hpp"

#include "confsteer/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace confsteer {

namespace {

constexpr std::uint64_t kLatentTag = 1;
constexpr std::uint64_t kSweepTag = 3;
constexpr std::uint64_t kSteeredTag = 4;
constexpr std::uint64_t kDirectionTag = 1000;
constexpr std::uint64_t kRowTag = 2000;

int condition_index(Condition c) { return static_cast<int>(c); }

std::string question_id(int q) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%06d", q);
  return buf;
}

VectorXd gaussian(Eigen::Index n, Xoshiro256 &rng) {
  VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x(i) = rng.normal();
  return x;
}

double framing_offset(int framing, double spread) {
  return spread * (2.0 * (framing - 1) / (kNumFramings - 1) - 1.0);
}

} // namespace

void SynthConfig::validate() const {
  if (dim < 2)
    throw ValidationError("synth: dim must be >= 2");
  if (n_questions < 1 || rows_per_question < 1 || samples_per_question < 1)
    throw ValidationError("synth: counts must be positive");
  if (!(planted_cosine >= -1.0 && planted_cosine <= 1.0))
    throw ValidationError("synth: planted_cosine must lie in [-1, 1]");
  for (double s : {noise_sigma, confidence_noise, response_noise, framing_spread})
    if (!std::isfinite(s) || s < 0)
      throw ValidationError("synth: noise levels must be finite and >= 0");
  if (!std::isfinite(confidence_bias) || !std::isfinite(response_gain) ||
      !std::isfinite(confidence_coupling))
    throw ValidationError("synth: non-finite parameter");
}

SynthOutput generate(const SynthConfig &cfg) {
  cfg.validate();
  SynthOutput out;
  GroundTruth &gt = out.truth;

  Xoshiro256 dir_rng(derive_seed(cfg.seed, kDirectionTag + static_cast<std::uint64_t>(cfg.layer)));
  gt.u = gaussian(cfg.dim, dir_rng).normalized();
  VectorXd w = gaussian(cfg.dim, dir_rng);
  w -= w.dot(gt.u) * gt.u;
  w.normalize();
  const double rho = cfg.planted_cosine;
  gt.v = rho * gt.u + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * w;

  Xoshiro256 lat_rng(derive_seed(cfg.seed, kLatentTag));
  gt.accuracy.resize(cfg.n_questions);
  gt.confidence.resize(cfg.n_questions);
  for (int q = 0; q < cfg.n_questions; ++q) {
    gt.question_ids.push_back(question_id(q));
    const double a = lat_rng.uniform();
    const double c = cfg.confidence_coupling * a + cfg.confidence_bias +
                     cfg.confidence_noise * lat_rng.normal();
    gt.accuracy(q) = a;
    gt.confidence(q) = std::clamp(c, 0.0, 1.0);
  }

  const auto row_tag = kRowTag + 8 * static_cast<std::uint64_t>(cfg.layer) +
                       static_cast<std::uint64_t>(condition_index(cfg.condition));
  Xoshiro256 rng(derive_seed(cfg.seed, row_tag));
  ActivationDataset &ds = out.dataset;
  ds.layer = cfg.layer;
  ds.model_id = cfg.model_id;
  ds.condition = cfg.condition;
  ds.position = Position::prompt_final;
  const Eigen::Index n_rows = Eigen::Index{cfg.n_questions} * cfg.rows_per_question;
  ds.rows.resize(n_rows, cfg.dim);
  ds.meta.reserve(static_cast<std::size_t>(n_rows));

  const bool has_acc = cfg.condition != Condition::pure_confidence;
  const bool has_conf = cfg.condition != Condition::pure_correctness;
  Eigen::Index row = 0;
  for (int q = 0; q < cfg.n_questions; ++q) {
    const double a = gt.accuracy(q);
    for (int r = 0; r < cfg.rows_per_question; ++r, ++row) {
      RowMeta m;
      m.question_id = gt.question_ids[static_cast<std::size_t>(q)];
      m.dataset_name = "synthetic";
      double c = gt.confidence(q);
      if (cfg.condition == Condition::pure_confidence) {
        m.framing = r % kNumFramings + 1;
        c = std::clamp(c + framing_offset(*m.framing, cfg.framing_spread), 0.0, 1.0);
      }
      VectorXd h = cfg.noise_sigma * gaussian(cfg.dim, rng);
      if (has_acc)
        h += a * gt.u;
      if (has_conf)
        h += c * gt.v;
      ds.rows.row(row) = h.cast<float>().transpose();
      m.empirical_accuracy = a;
      m.verbalized_confidence = c;
      m.correct = rng.bernoulli(a);
      ds.meta.push_back(std::move(m));
    }
  }
  return out;
}

double simulate_response(double c_q, double alpha, const SynthConfig &cfg, Xoshiro256 &rng) {
  double noise = 0;
  if (cfg.response_noise > 0)
    noise = cfg.response_noise * rng.normal();
  return std::clamp(c_q + cfg.response_gain * alpha + noise, 0.0, 1.0);
}

ClosedLoopReport run_pipeline_closed_loop(const SynthConfig &cfg) {
  SynthConfig gen_cfg = cfg;
  gen_cfg.condition = Condition::pure_correctness;
  const SynthOutput synth = generate(gen_cfg);
  const ActivationDataset ds = split_by_question(synth.dataset, {}, cfg.seed);

  std::map<std::string, std::size_t> q_index;
  for (std::size_t i = 0; i < synth.truth.question_ids.size(); ++i)
    q_index[synth.truth.question_ids[i]] = i;

  const auto probe =
      fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid()).fit;
  const ActivationDataset val = ds.select(ds.indices_in(Split::val));
  const ActivationDataset test = ds.select(ds.indices_in(Split::test));
  if (test.size() == 0)
    throw ValidationError("closed loop: empty test split");
  const auto iso = calibrate_probe(probe, val);

  std::vector<double> val_conf;
  for (const auto &[q, score] : question_probe_scores(probe, val))
    val_conf.push_back(synth.truth.confidence(static_cast<Eigen::Index>(q_index.at(q))));

  const int samples = cfg.samples_per_question;
  auto mean_response = [&](double c, double alpha, Xoshiro256 &rng) {
    double s = 0;
    for (int k = 0; k < samples; ++k)
      s += simulate_response(c, alpha, cfg, rng);
    return s / samples;
  };

  Xoshiro256 sweep_rng(derive_seed(cfg.seed, kSweepTag));
  std::vector<SweepPoint> sweep;
  for (double alpha : default_alpha_grid()) {
    SweepPoint p;
    p.alpha = alpha;
    p.confidences.resize(static_cast<Eigen::Index>(val_conf.size()));
    for (std::size_t i = 0; i < val_conf.size(); ++i)
      p.confidences(static_cast<Eigen::Index>(i)) = mean_response(val_conf[i], alpha, sweep_rng);
    sweep.push_back(std::move(p));
  }

  ClosedLoopReport rep;
  rep.transfer = fit_transfer(std::move(sweep));
  rep.plan = plan_adaptive(probe, iso, rep.transfer, test);

  const auto n = static_cast<Eigen::Index>(rep.plan.entries.size());
  rep.accuracy.resize(n);
  rep.baseline.resize(n);
  rep.steered_mean.resize(n);
  Xoshiro256 steer_rng(derive_seed(cfg.seed, kSteeredTag));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &e = rep.plan.entries[static_cast<std::size_t>(i)];
    const auto qi = static_cast<Eigen::Index>(q_index.at(e.question_id));
    rep.accuracy(i) = synth.truth.accuracy(qi);
    rep.baseline(i) = synth.truth.confidence(qi);
    rep.steered_mean(i) = mean_response(rep.baseline(i), e.alpha_star, steer_rng);
  }
  rep.unsteered = ece(rep.baseline, rep.accuracy);
  rep.steered = ece(rep.steered_mean, rep.accuracy);
  rep.ece_unsteered = rep.unsteered.ece;
  rep.ece_steered = rep.steered.ece;
  return rep;
}

} // namespace confsteer
