#include "doctest.h"
#include "support.hpp"

#include "confsteer/geometry.hpp"
#include "confsteer/probes.hpp"
#include "confsteer/synthdata.hpp"

#include <algorithm>
#include <map>

using namespace confsteer;
using doctest::Approx;

namespace {

ActivationDataset planted(double noise, std::uint64_t seed, int questions = 600,
                          Condition cond = Condition::pure_correctness, int layer = 0) {
  SynthConfig cfg;
  cfg.dim = 16;
  cfg.n_questions = questions;
  cfg.rows_per_question = 2;
  cfg.noise_sigma = noise;
  cfg.seed = seed;
  cfg.condition = cond;
  cfg.layer = layer;
  return split_by_question(generate(cfg).dataset, {}, seed);
}

} // namespace

TEST_SUITE("probes") {

TEST_CASE("planted accuracy direction at SNR 10") {
  SynthConfig cfg;
  cfg.dim = 16;
  cfg.n_questions = 600;
  cfg.rows_per_question = 2;
  cfg.noise_sigma = 0.03;
  cfg.condition = Condition::pure_correctness;
  cfg.seed = 21;
  const auto out = generate(cfg);
  const auto ds = split_by_question(out.dataset, {}, 21);
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  REQUIRE(r.fit.r2_test.has_value());
  CHECK(*r.fit.r2_test >= 0.9);
  CHECK(weight_cosine(r.fit.weights, out.truth.u) >= 0.95);
}

TEST_CASE("noiseless target is recovered exactly") {
  const auto ds = planted(0.0, 22);
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  CHECK(*r.fit.r2_test >= 0.999);
}

TEST_CASE("binary target carries projection stats") {
  const auto ds = planted(0.05, 23);
  const auto r = fit_probe(ds, ProbeTarget::binary_correct, default_lambda_grid());
  REQUIRE(r.projection_stats.has_value());
  REQUIRE(r.projection_stats->cohens_d.has_value());
  CHECK(*r.projection_stats->cohens_d > 0.5);
  REQUIRE(r.projection_stats->pearson_r.has_value());
  CHECK(*r.projection_stats->pearson_r > 0.8);
  const auto c = fit_probe(planted(0.05, 23, 600, Condition::pure_confidence),
                           ProbeTarget::verbalized_confidence, default_lambda_grid());
  CHECK_FALSE(c.projection_stats.has_value());
}

TEST_CASE("rows without the field are excluded and counted") {
  auto ds = planted(0.05, 24, 200);
  for (std::size_t i = 0; i < ds.size(); i += 5)
    ds.meta[i].empirical_accuracy.reset();
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  CHECK(r.excluded_rows == (ds.size() + 4) / 5);
  CHECK(r.train_rows + r.val_rows + r.test_rows + r.excluded_rows == ds.size());
}

TEST_CASE("missing field and missing splits") {
  auto ds = planted(0.05, 25, 50);
  for (auto &m : ds.meta)
    m.empirical_accuracy.reset();
  CHECK_THROWS_WITH_AS(fit_probe(ds, ProbeTarget::empirical_accuracy, {1.0}),
                       doctest::Contains("empirical_accuracy"), ValidationError);

  auto nosplit = planted(0.05, 25, 50);
  for (auto &m : nosplit.meta)
    if (m.split == Split::val)
      m.split = Split::train;
  CHECK_THROWS_WITH_AS(fit_probe(nosplit, ProbeTarget::empirical_accuracy, {1.0}),
                       doctest::Contains("val"), ValidationError);

  auto constant = planted(0.05, 25, 50);
  for (auto &m : constant.meta)
    m.empirical_accuracy = 0.5;
  CHECK_THROWS_AS(fit_probe(constant, ProbeTarget::empirical_accuracy, {1.0}), ValidationError);
}

TEST_CASE("binned accuracy maps to decile midpoints") {
  RowMeta m;
  m.empirical_accuracy = 0.43;
  CHECK(*probe_target_value(m, ProbeTarget::empirical_accuracy) == 0.43);
  CHECK(*probe_target_value(m, ProbeTarget::empirical_accuracy, {true, false}) ==
        Approx(0.45));
  m.empirical_accuracy = 1.0;
  CHECK(*probe_target_value(m, ProbeTarget::empirical_accuracy, {true, false}) ==
        Approx(0.95));
  m.correct = true;
  CHECK(*probe_target_value(m, ProbeTarget::binary_correct) == 1.0);
  CHECK_FALSE(probe_target_value(m, ProbeTarget::verbalized_confidence).has_value());
}

TEST_CASE("standardized fit predicts in raw space") {
  const auto ds = planted(0.05, 26, 300);
  const auto plain = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  const auto z =
      fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid(), {false, true});
  CHECK(*z.fit.r2_test == Approx(*plain.fit.r2_test).epsilon(0.02));
}

TEST_CASE("predict") {
  RidgeFit<double> fit;
  fit.weights = Eigen::Vector4d(1, -2, 0.5, 3);
  fit.bias = 0.25;
  CHECK(probe_predict(fit, MatrixXd::Zero(3, 4)) == VectorXd::Constant(3, 0.25));

  Xoshiro256 rng(27);
  MatrixXd X(3, 4);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      X(i, j) = rng.normal();
  const VectorXd p = probe_predict(fit, X);
  for (Eigen::Index i = 0; i < 3; ++i) {
    double manual = fit.bias;
    for (Eigen::Index j = 0; j < 4; ++j)
      manual += X(i, j) * fit.weights(j);
    CHECK(p(i) == Approx(manual).epsilon(1e-14));
  }
  CHECK_THROWS_AS(probe_predict(fit, MatrixXd::Zero(1, 3)), ValidationError);
}

TEST_CASE("predict on a training row of an exact fit returns its target") {
  const auto ds = planted(0.0, 28, 100);
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, {1e-4});
  const auto idx = ds.indices_in(Split::train);
  const VectorXd p = probe_predict(r.fit, ds.features({idx.front()}));
  CHECK(p(0) == Approx(*ds.meta[idx.front()].empirical_accuracy).epsilon(1e-4));
}

TEST_CASE("layer curve is ordered and tracks SNR") {
  std::vector<ActivationDataset> layers;
  const std::vector<double> noise{0.4, 0.2, 0.1, 0.05};
  for (int l = 3; l >= 0; --l)
    layers.push_back(planted(noise[static_cast<std::size_t>(l)], 29, 400,
                             Condition::pure_correctness, l));
  const auto curve = layer_curve(layers, ProbeTarget::empirical_accuracy, default_lambda_grid());
  REQUIRE(curve.size() == 4);
  for (std::size_t i = 0; i < curve.size(); ++i)
    CHECK(curve[i].layer == static_cast<int>(i));
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(*curve[i].fit.r2_test >= *curve[i - 1].fit.r2_test - 0.05);

  CHECK(layer_curve({layers.front()}, ProbeTarget::empirical_accuracy, {1.0}).size() == 1);
  auto other = layers.back();
  other.model_id = "other";
  CHECK_THROWS_AS(layer_curve({layers.front(), other}, ProbeTarget::empirical_accuracy, {1.0}),
                  ValidationError);
}

TEST_CASE("shuffled labels give no test signal") {
  for (int layer = 0; layer < 3; ++layer) {
    auto ds = planted(0.1, 30 + static_cast<std::uint64_t>(layer), 600,
                      Condition::pure_correctness, layer);
    std::vector<double> acc;
    std::map<std::string, double> by_q;
    for (const auto &m : ds.meta)
      by_q.emplace(m.question_id, *m.empirical_accuracy);
    for (const auto &[q, a] : by_q)
      acc.push_back(a);
    Xoshiro256 rng(derive_seed(99, static_cast<std::uint64_t>(layer)));
    for (std::size_t i = acc.size(); i > 1; --i)
      std::swap(acc[i - 1], acc[static_cast<std::size_t>(rng.uniform() * static_cast<double>(i))]);
    std::size_t k = 0;
    for (auto &[q, a] : by_q)
      a = acc[k++];
    for (auto &m : ds.meta)
      m.empirical_accuracy = by_q.at(m.question_id);
    const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
    CHECK(*r.fit.r2_test <= 0.05);
  }
}

TEST_CASE("selected direction is stable under refit on train and val") {
  auto ds = planted(0.1, 31, 800);
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  std::vector<std::size_t> idx = ds.indices_in(Split::train);
  const auto val = ds.indices_in(Split::val);
  idx.insert(idx.end(), val.begin(), val.end());
  VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = *ds.meta[idx[i]].empirical_accuracy;
  const auto refit = fit_ridge(ds.features(idx), y, r.fit.lambda);
  CHECK(weight_cosine(r.fit.weights, refit.weights) >= 0.99);
}

TEST_CASE("orthogonal planted directions give near-zero probe cosine") {
  SynthConfig cfg;
  cfg.dim = 32;
  cfg.n_questions = 2000;
  cfg.rows_per_question = 2;
  cfg.seed = 32;
  cfg.condition = Condition::pure_correctness;
  const auto acc = split_by_question(generate(cfg).dataset, {}, 32);
  cfg.condition = Condition::pure_confidence;
  const auto conf = split_by_question(generate(cfg).dataset, {}, 32);
  const auto a = fit_probe(acc, ProbeTarget::empirical_accuracy, default_lambda_grid());
  const auto c = fit_probe(conf, ProbeTarget::verbalized_confidence, default_lambda_grid());
  CHECK(std::abs(weight_cosine(a.fit.weights, c.fit.weights)) < 0.05);
}

TEST_CASE("probe file round trip") {
  testutil::TempDir tmp("probe");
  const auto r = fit_probe(planted(0.1, 33, 100), ProbeTarget::empirical_accuracy, {1.0});
  save_probe(tmp / "p.json", r);
  const auto back = load_probe(tmp / "p.json");
  CHECK(back.layer == r.layer);
  CHECK(back.target == ProbeTarget::empirical_accuracy);
  CHECK(back.fit.lambda == r.fit.lambda);
  CHECK(back.fit.bias == r.fit.bias);
  CHECK((back.fit.weights - r.fit.weights.cast<float>().cast<double>()).norm() == 0.0);
  CHECK_THROWS_AS(load_probe(tmp / "missing.json"), IoError);
}

TEST_CASE("target names round trip") {
  for (auto t : {ProbeTarget::empirical_accuracy, ProbeTarget::binary_correct,
                 ProbeTarget::verbalized_confidence})
    CHECK(parse_probe_target(to_string(t)) == t);
  CHECK_THROWS_AS(parse_probe_target("accuracy"), ValidationError);
}

}
