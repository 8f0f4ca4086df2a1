#include "doctest.h"
#include "support.hpp"

#include "confsteer/csv.hpp"
#include "confsteer/steering.hpp"
#include "confsteer/synthdata.hpp"

#include <algorithm>
#include <fstream>

using namespace confsteer;
using doctest::Approx;

namespace {

RowMeta conf_row(const std::string &q, double c) {
  RowMeta m;
  m.question_id = q;
  m.dataset_name = "toy";
  m.verbalized_confidence = c;
  m.framing = 1;
  return m;
}

ActivationDataset rows_of(std::vector<std::pair<RowMeta, std::vector<double>>> rows) {
  ActivationDataset ds;
  ds.condition = Condition::pure_confidence;
  ds.rows.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows.front().second.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].second.size(); ++j)
      ds.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(rows[i].second[j]);
    ds.meta.push_back(rows[i].first);
  }
  return ds;
}

SweepPoint point(double alpha, std::vector<double> c) {
  return {alpha, Eigen::Map<VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()))};
}

TransferFunction linear_transfer() {
  std::vector<SweepPoint> sweep;
  for (int i = -2; i <= 2; ++i)
    sweep.push_back(point(i, {0.5 + 0.2 * i}));
  return fit_transfer(sweep);
}

} // namespace

TEST_SUITE("steering") {

TEST_CASE("single contrast") {
  const auto ds = rows_of({{conf_row("a", 0.9), {1, 0}}, {conf_row("a", 0.1), {0, 1}}});
  const auto sv = build_caa(ds);
  CHECK(sv.raw == Eigen::Vector2d(1, -1));
  CHECK(sv.num_questions == 1);
  CHECK(sv.mean_activation_norm == Approx(1.0));
}

TEST_CASE("two questions average their contrasts") {
  const auto ds = rows_of({{conf_row("a", 0.9), {2, 0}},
                           {conf_row("a", 0.1), {0, 0}},
                           {conf_row("b", 0.8), {1, 2}},
                           {conf_row("b", 0.2), {1, 0}},
                           {conf_row("c", 0.9), {5, 5}}});
  const auto sv = build_caa(ds);
  CHECK(sv.raw == Eigen::Vector2d(1, 1));
  CHECK(sv.num_questions == 2);
  CHECK(sv.skipped_questions == 1);
}

TEST_CASE("no qualifying rows") {
  const auto ds = rows_of({{conf_row("a", 0.5), {1, 0}}, {conf_row("b", 0.5), {0, 1}}});
  CHECK_THROWS_AS(build_caa(ds), ValidationError);
  CHECK_THROWS_AS(build_caa(ds, 0.2, 0.3), ValidationError);
}

TEST_CASE("question-weighted, order-invariant, swap negates") {
  auto ds = testutil::tiny_dataset(30, 6, 4, 41);
  const auto base = build_caa(ds);

  std::vector<std::size_t> perm(ds.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    perm[i] = perm.size() - 1 - i;
  CHECK((build_caa(ds.select(perm)).raw - base.raw).norm() <= 1e-12);

  std::vector<std::size_t> dup(ds.size());
  for (std::size_t i = 0; i < dup.size(); ++i)
    dup[i] = i;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.meta[i].question_id == "q0")
      dup.push_back(i);
  auto doubled = ds.select(dup);
  for (std::size_t i = ds.size(); i < doubled.size(); ++i)
    doubled.meta[i].question_id = "q0";
  CHECK((build_caa(doubled).raw - base.raw).norm() <= 1e-12);

  auto swapped = ds;
  for (auto &m : swapped.meta)
    m.verbalized_confidence = 1.0 - *m.verbalized_confidence;
  CHECK((build_caa(swapped).raw + base.raw).norm() <= 1e-12);
}

TEST_CASE("prepare direction") {
  SteeringVector sv;
  sv.raw = Eigen::Vector2d(3, 4);
  sv.mean_activation_norm = 10;
  CHECK((prepare_direction(sv) - Eigen::Vector2d(6, 8)).norm() <= 1e-12);
  Xoshiro256 rng(42);
  for (int i = 0; i < 20; ++i) {
    sv.raw = VectorXd(5);
    for (Eigen::Index j = 0; j < 5; ++j)
      sv.raw(j) = rng.normal();
    sv.mean_activation_norm = 0.1 + 10 * rng.uniform();
    const VectorXd d = prepare_direction(sv);
    CHECK(std::abs(d.norm() - sv.mean_activation_norm) <= 1e-9);
    SteeringVector scaled = sv;
    scaled.raw *= 0.01 + 100 * rng.uniform();
    CHECK((prepare_direction(scaled) - d).norm() <= 1e-9);
  }
  sv.raw = Eigen::Vector2d(0, 0);
  CHECK_THROWS_AS(prepare_direction(sv), ValidationError);
}

TEST_CASE("apply steering") {
  const Eigen::Vector2d h(1, 1), d(6, 8);
  CHECK(apply_steering(h, d, 0.0) == h);
  CHECK(apply_steering(h, d, 0.5) == Eigen::Vector2d(4, 5));
  CHECK((apply_steering(apply_steering(h, d, 0.37), d, -0.37) - h).norm() <= 1e-15);
  CHECK_THROWS_AS(apply_steering(VectorXd(h), VectorXd(Eigen::Vector3d(1, 2, 3)), 1.0), ValidationError);
}

TEST_CASE("alpha grids") {
  const auto g = default_alpha_grid();
  REQUIRE(g.size() == 41);
  CHECK(g.front() == Approx(-2.0));
  CHECK(g[20] == Approx(0.0));
  CHECK(g.back() == Approx(2.0));
  CHECK(coarse_alpha_grid().size() == 7);
}

TEST_CASE("increasing means keep their knots") {
  const auto tf = fit_transfer({point(1, {0.7}), point(-1, {0.2, 0.4}), point(0, {0.5})});
  REQUIRE(tf.knots.size() == 3);
  CHECK(tf.knots[0].alpha == -1);
  CHECK(tf.knots[0].mean_confidence == Approx(0.3));
  for (const auto &k : tf.knots)
    CHECK(tf(k.alpha) == k.mean_confidence);
  CHECK(tf.alpha_range == std::pair{-1.0, 1.0});
}

TEST_CASE("noisy means are smoothed and plateaus collapsed") {
  const auto tf = fit_transfer({point(-1, {0.30}), point(0, {0.28}), point(1, {0.45})});
  REQUIRE(tf.knots.size() == 2);
  CHECK(tf.knots[0].alpha == -0.5);
  CHECK(tf.knots[0].mean_confidence == Approx(0.29).epsilon(1e-12));
  CHECK(tf.knots[1].alpha == 1.0);
  CHECK(tf.knots[1].mean_confidence == Approx(0.45).epsilon(1e-12));
}

TEST_CASE("flat transfer is an error") {
  CHECK_THROWS_AS(fit_transfer({point(-1, {0.5}), point(0, {0.5}), point(1, {0.5})}),
                  FlatTransferError);
  CHECK_THROWS_AS(fit_transfer({point(-1, {0.6}), point(1, {0.5})}), FlatTransferError);
  CHECK_THROWS_AS(fit_transfer({point(-1, {0.5}), point(1, {0.505})}), FlatTransferError);
  CHECK_THROWS_AS(fit_transfer({point(1, {0.5}), point(1, {0.6})}), ValidationError);
}

TEST_CASE("inverting the transfer round-trips") {
  const auto tf = fit_transfer({point(-2, {0.1}), point(-1, {0.15}), point(0, {0.5}),
                                point(1, {0.52}), point(2, {0.9})});
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 + 0.8 * i / 100.0;
    const auto inv = monotone_interp_invert(tf.interpolant, t);
    CHECK_FALSE(inv.clamped);
    CHECK(std::abs(tf(inv.x) - t) <= 1e-8);
  }
}

TEST_CASE("plan hits knots, clamps and is monotone") {
  const auto tf = linear_transfer();
  IsotonicModel<double> iso;
  iso.knot_x = {0.0, 1.0};
  iso.knot_y = {0.0, 1.0};
  RidgeFit<double> probe;
  probe.weights = VectorXd::Unit(2, 0);
  probe.bias = 0;

  ActivationDataset test;
  test.rows.resize(5, 2);
  test.rows << 0.5f, 0, 0.95f, 0, 0.05f, 0, 0.3f, 0, 0.7f, 0;
  for (auto q : {"hit", "above", "below", "mid1", "mid2"})
    test.meta.push_back(conf_row(q, 0.5));
  const auto plan = plan_adaptive(probe, iso, tf, test);
  REQUIRE(plan.entries.size() == 5);
  CHECK(plan.entries[0].question_id == "hit");
  CHECK(plan.entries[0].alpha_star == 0.0);
  CHECK_FALSE(plan.entries[0].clamped);
  CHECK(plan.entries[1].alpha_star == 2.0);
  CHECK(plan.entries[1].clamped);
  CHECK(plan.entries[2].alpha_star == -2.0);
  CHECK(plan.entries[2].clamped);

  auto sorted = plan.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto &a, const auto &b) { return a.target_confidence < b.target_confidence; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    CHECK(sorted[i].alpha_star >= sorted[i - 1].alpha_star);

  CHECK_THROWS_AS(plan_adaptive(probe, iso, tf, ActivationDataset{}), ValidationError);
  RidgeFit<double> wide = probe;
  wide.weights = VectorXd::Zero(3);
  CHECK_THROWS_AS(plan_adaptive(wide, iso, tf, test), ValidationError);
}

TEST_CASE("probe scores average over a question's rows") {
  RidgeFit<double> probe;
  probe.weights = VectorXd::Ones(1);
  probe.bias = 1;
  ActivationDataset ds;
  ds.rows.resize(3, 1);
  ds.rows << 1, 3, 10;
  ds.meta = {conf_row("b", 0.5), conf_row("b", 0.5), conf_row("a", 0.5)};
  const auto s = question_probe_scores(probe, ds);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == std::pair<std::string, double>{"b", 3.0});
  CHECK(s[1] == std::pair<std::string, double>{"a", 11.0});
}

TEST_CASE("calibration maps probe scores to accuracy") {
  RidgeFit<double> probe;
  probe.weights = VectorXd::Ones(1);
  ActivationDataset ds;
  ds.rows.resize(3, 1);
  ds.rows << 0.1f, 0.5f, 0.9f;
  for (auto [q, a] : {std::pair{"x", 0.2}, {"y", 0.1}, {"z", 0.8}}) {
    auto m = conf_row(q, 0.5);
    m.empirical_accuracy = a;
    ds.meta.push_back(m);
  }
  const auto iso = calibrate_probe(probe, ds);
  CHECK(iso.knot_y[0] == Approx(0.15));
  CHECK(iso.knot_y[1] == Approx(0.15));
  CHECK(iso.knot_y[2] == Approx(0.8));
  for (auto &m : ds.meta)
    m.empirical_accuracy.reset();
  CHECK_THROWS_AS(calibrate_probe(probe, ds), ValidationError);
}

TEST_CASE("file formats round trip") {
  testutil::TempDir tmp("steer");
  SteeringVector sv;
  sv.layer = 4;
  sv.raw = Eigen::Vector3d(0.5, -1, 2);
  sv.mean_activation_norm = 3.25;
  sv.num_questions = 9;
  save_steering_vector(tmp / "v.json", sv);
  const auto v = load_steering_vector(tmp / "v.json");
  CHECK(v.layer == 4);
  CHECK(v.raw == sv.raw);
  CHECK(v.mean_activation_norm == 3.25);
  CHECK(v.num_questions == 9);
  CHECK(v.tau_hi == kDefaultTauHi);

  SteeringPlan plan;
  plan.entries.push_back({"q1", 0.3, 0.4, -0.25, false});
  plan.entries.push_back({"q2", 1.3, 1.0, 2.0, true});
  save_plan(tmp / "plan.csv", plan);
  const auto table = read_csv(tmp / "plan.csv");
  CHECK(table.header ==
        std::vector<std::string>{"question_id", "probe_raw", "target_confidence", "alpha_star",
                                 "clamped"});
  const auto p = load_plan(tmp / "plan.csv");
  REQUIRE(p.entries.size() == 2);
  CHECK(p.entries[1].clamped);
  CHECK(p.entries[0].alpha_star == -0.25);

  const auto tf = linear_transfer();
  save_transfer(tmp / "tf.csv", tf);
  const auto back = load_transfer(tmp / "tf.csv");
  REQUIRE(back.knots.size() == tf.knots.size());
  for (std::size_t i = 0; i < tf.knots.size(); ++i)
    CHECK(back.knots[i].mean_confidence == tf.knots[i].mean_confidence);

  {
    std::ofstream out(tmp / "flat.csv");
    out << "alpha,mean_confidence\n-1,0.5\n0,0.5\n1,0.5\n";
  }
  CHECK_THROWS_AS(load_transfer(tmp / "flat.csv"), FlatTransferError);

  {
    std::ofstream out(tmp / "sweep.csv");
    out << "alpha,question_id,confidence\n0.5,a,0.9\n-0.5,a,0.1\n0.5,b,0.7\n";
  }
  const auto sweep = load_sweep(tmp / "sweep.csv");
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].alpha == -0.5);
  CHECK(sweep[1].confidences.size() == 2);
}

}
