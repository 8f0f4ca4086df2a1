// Acceptance run: one PASS/FAIL line per criterion P1..P10.

#include "oracles.hpp"
#include "support.hpp"

#include "confsteer/activation_store.hpp"
#include "confsteer/geometry.hpp"
#include "confsteer/numerics/calibration.hpp"
#include "confsteer/numerics/isotonic.hpp"
#include "confsteer/numerics/pchip.hpp"
#include "confsteer/numerics/stats.hpp"
#include "confsteer/probes.hpp"
#include "confsteer/steering.hpp"
#include "confsteer/synthdata.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

using namespace confsteer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs)
    v(i++) = x;
  return v;
}

void p1(Outcome &o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto b = random_angle_baseline(10, 200, 1000, 20240101);
  const double secs = seconds_since(t0);
  o.detail << "mean=" << b.mean_deg << " two_sigma=" << b.two_sigma_deg << " time=" << secs << "s";
  o.require(std::abs(b.mean_deg - 79.1) <= 0.5, "mean within 79.1 +- 0.5");
  o.require(std::abs(b.two_sigma_deg - 0.8) <= 0.4, "2sigma within 0.8 +- 0.4");
  o.require(secs < 60, "runtime < 60 s");
}

double probe_cosine_for(double rho, int layer, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.dim = 32;
  cfg.n_questions = 2000;
  cfg.rows_per_question = 1;
  cfg.planted_cosine = rho;
  cfg.noise_sigma = 0.1;
  cfg.layer = layer;
  cfg.seed = seed;
  cfg.condition = Condition::pure_correctness;
  const auto acc = split_by_question(generate(cfg).dataset, {}, seed);
  cfg.condition = Condition::pure_confidence;
  const auto conf = split_by_question(generate(cfg).dataset, {}, seed);
  const auto a = fit_probe(acc, ProbeTarget::empirical_accuracy, default_lambda_grid());
  const auto c = fit_probe(conf, ProbeTarget::verbalized_confidence, default_lambda_grid());
  return weight_cosine(a.fit.weights, c.fit.weights);
}

void p2(Outcome &o) {
  for (int layer = 0; layer < 4; ++layer) {
    const double c = probe_cosine_for(0.0, layer, 2);
    o.detail << "L" << layer << " cos=" << c << " ";
    o.require(std::abs(c) < 0.05, "|cos| < 0.05 at layer " + std::to_string(layer));
  }
  const double c9 = probe_cosine_for(0.9, 0, 2);
  o.detail << "rho0.9 cos=" << c9;
  o.require(c9 >= 0.75 && c9 <= 0.98, "rho=0.9 cosine in [0.75, 0.98]");
}

void p3(Outcome &o) {
  SynthConfig cfg;
  cfg.dim = 32;
  cfg.n_questions = 1000;
  cfg.rows_per_question = 2;
  cfg.noise_sigma = 0;
  cfg.condition = Condition::pure_correctness;
  cfg.seed = 3;
  const auto out = generate(cfg);
  auto ds = split_by_question(out.dataset, {}, 3);
  const auto r = fit_probe(ds, ProbeTarget::empirical_accuracy, default_lambda_grid());
  const double cos = weight_cosine(r.fit.weights, out.truth.u);
  o.detail << "noiseless r2_test=" << *r.fit.r2_test << " cos=" << cos;
  o.require(*r.fit.r2_test >= 0.999, "noiseless test R2 >= 0.999");
  o.require(cos >= 0.999, "direction cosine >= 0.999");

  cfg.noise_sigma = 0.1;
  auto noisy = split_by_question(generate(cfg).dataset, {}, 3);
  std::map<std::string, double> by_q;
  for (const auto &m : noisy.meta)
    by_q.emplace(m.question_id, *m.empirical_accuracy);
  std::vector<double> values;
  for (const auto &[q, a] : by_q)
    values.push_back(a);
  Xoshiro256 rng(33);
  for (std::size_t i = values.size(); i > 1; --i)
    std::swap(values[i - 1], values[static_cast<std::size_t>(rng.uniform() * static_cast<double>(i))]);
  std::size_t k = 0;
  for (auto &[q, a] : by_q)
    a = values[k++];
  for (auto &m : noisy.meta)
    m.empirical_accuracy = by_q.at(m.question_id);
  const auto null = fit_probe(noisy, ProbeTarget::empirical_accuracy, default_lambda_grid());
  o.detail << " shuffled r2_test=" << *null.fit.r2_test;
  o.require(*null.fit.r2_test <= 0.05, "shuffled test R2 <= 0.05");
}

void p4(Outcome &o) {
  for (double noise : {0.1, 0.2}) {
    SynthConfig cfg;
    cfg.dim = 32;
    cfg.n_questions = 500;
    cfg.rows_per_question = 11;
    cfg.noise_sigma = noise;
    cfg.framing_spread = 0.6;
    cfg.condition = Condition::pure_confidence;
    cfg.seed = 4;
    const auto out = generate(cfg);
    const auto sv = build_caa(out.dataset);
    const double cos = weight_cosine(sv.raw, out.truth.v);
    o.detail << "noise=" << noise << " questions=" << sv.num_questions << " cos=" << cos << " ";
    o.require(cos >= 0.95, "cosine >= 0.95 at noise " + std::to_string(noise));
  }
}

void p5(Outcome &o) {
  SynthConfig cfg;
  cfg.response_gain = 0.3;
  cfg.confidence_bias = 0.5;
  cfg.noise_sigma = 0.1;
  cfg.n_questions = 500;
  cfg.samples_per_question = 50;
  cfg.seed = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_pipeline_closed_loop(cfg);
  const double secs = seconds_since(t0);
  o.detail << "ece_unsteered=" << r.ece_unsteered << " ece_steered=" << r.ece_steered
           << " ratio=" << r.ece_unsteered / r.ece_steered << " time=" << secs << "s";
  o.require(r.ece_steered <= r.ece_unsteered / 3, "ece_steered <= ece_unsteered / 3");
  o.require(secs < 120, "runtime < 120 s");
}

void p6(Outcome &o) {
  Xoshiro256 rng(6);
  double worst = 0;
  int clamp_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 15);
    std::vector<double> x, y;
    double xv = -2, yv = rng.uniform() * 0.2;
    for (int i = 0; i < n; ++i) {
      x.push_back(xv += 0.01 + rng.uniform());
      y.push_back(yv += 1e-4 + rng.uniform() * 0.1);
    }
    const auto f = monotone_interp_fit(x, y);
    for (int t = 0; t < 5; ++t) {
      const double target = y.front() + rng.uniform() * (y.back() - y.front());
      const auto inv = monotone_interp_invert(f, target);
      worst = std::max(worst, std::abs(f(inv.x) - target));
      clamp_failures += inv.clamped;
    }
    const auto above = monotone_interp_invert(f, y.back() + 0.1);
    const auto below = monotone_interp_invert(f, y.front() - 0.1);
    clamp_failures += !(above.clamped && above.x == x.back());
    clamp_failures += !(below.clamped && below.x == x.front());
  }
  o.detail << "worst=" << worst << " clamp_failures=" << clamp_failures;
  o.require(worst <= 1e-8, "round trip within 1e-8");
  o.require(clamp_failures == 0, "out-of-range targets clamp with flag");
}

void p7(Outcome &o) {
  Xoshiro256 rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 20);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto &v : y)
      v = trial % 2 ? std::round(rng.uniform() * 8) / 8 : rng.uniform();
    mismatches += pava(y) != oracle::pava_by_merging(y);
  }
  int exhaustive = 0, not_minimal = 0;
  double worst_gap = 0;
  for (int n = 1; n <= 6; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i)
      total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<double> y;
      for (int i = 0, c = code; i < n; ++i, c /= 3)
        y.push_back(0.5 * (c % 3));
      const auto fit = pava(y);
      double sse = 0;
      for (int i = 0; i < n; ++i)
        sse += (y[i] - fit[i]) * (y[i] - fit[i]);
      // Optimal block means have denominators <= 6, so the 1/120 grid holds them.
      const double best = oracle::min_monotone_sse_on_grid(y, 120);
      worst_gap = std::max(worst_gap, sse - best);
      not_minimal += sse > best + 1e-12;
      ++exhaustive;
    }
  }
  o.detail << "random_mismatches=" << mismatches << " exhaustive=" << exhaustive
           << " not_minimal=" << not_minimal << " worst_gap=" << worst_gap;
  o.require(mismatches == 0, "exact match with merging oracle");
  o.require(not_minimal == 0, "squared-error minimizer on all length <= 6 instances");
}

void p8(Outcome &o) {
  const double tol = 1e-12;
  auto near = [&](double got, double want, const std::string &what) {
    o.require(std::abs(got - want) <= tol, what);
  };
  const auto two = ece(vec({0.9, 0.1}), vec({0.5, 0.1}), 10);
  near(two.ece, 0.2, "ece two-bin");
  near(two.mae, 0.2, "mae two-bin");
  near(two.brier, 0.08, "brier two-bin");
  const auto worst = ece(vec({1, 1, 1, 1}), vec({0, 0, 0, 0}));
  near(worst.ece, 1, "ece maximal");
  near(worst.brier, 1, "brier maximal");
  near(worst.mae, 1, "mae maximal");
  const auto same = ece(vec({0.2, 0.7}), vec({0.2, 0.7}));
  near(same.ece + same.brier + same.mae, 0, "perfect calibration");
  near(cohens_d(vec({2, 3}), vec({0, 1})).d, 2.0 / std::sqrt(0.5), "cohens d");
  near(cohens_d(vec({1, 4, 2}), vec({2, 1, 4})).d, 0, "cohens d permutation");
  near(pearson_r(vec({1, 2, 3}), vec({1, 3, 2})), 0.5, "pearson r");
  near(pearson_r(vec({1, 2, 4}), vec({3, 5, 9})), 1, "pearson affine");
  near(pearson_r(vec({1, 2, 4}), vec({-1, -2, -4})), -1, "pearson reflection");

  Xoshiro256 rng(8);
  double worst_consistency = 0;
  for (int t = 0; t < 200; ++t) {
    VectorXd c(50), a(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
      c(i) = rng.uniform();
      a(i) = rng.uniform();
    }
    const auto r = ece(c, a, 1 + static_cast<std::size_t>(t % 20));
    worst_consistency = std::max(worst_consistency, std::abs(r.ece - ece_from_bins(r.bins)));
  }
  o.detail << "bin self-consistency worst=" << worst_consistency;
  o.require(worst_consistency <= tol, "ece recomputable from bins");
}

void p9(Outcome &o) {
  SynthConfig cfg;
  cfg.dim = 64;
  cfg.n_questions = 1000;
  cfg.rows_per_question = 4;
  cfg.planted_cosine = 0;
  cfg.noise_sigma = 0.1;
  cfg.confidence_coupling = 0;
  cfg.confidence_noise = 0.15;
  cfg.condition = Condition::joint;
  cfg.seed = 9;
  const auto ds = split_by_question(generate(cfg).dataset, {}, 9);
  const auto a = extract_subspace(ds, ProbeTarget::empirical_accuracy, 10, 40);
  const auto b = extract_subspace(ds, ProbeTarget::verbalized_confidence, 10, 40);
  auto ortho = [](const Subspace &s) {
    return (s.basis * s.basis.transpose() - MatrixXd::Identity(s.rank(), s.rank()))
        .cwiseAbs()
        .maxCoeff();
  };
  const double ortho_err = std::max(ortho(a), ortho(b));
  const auto self_a = removal_retention(ds, ProbeTarget::empirical_accuracy, a);
  const auto self_b = removal_retention(ds, ProbeTarget::verbalized_confidence, b);
  const auto cross_a = removal_retention(ds, ProbeTarget::empirical_accuracy, b);
  const auto cross_b = removal_retention(ds, ProbeTarget::verbalized_confidence, a);
  const auto var_a = variance_decomposition(ds, ProbeTarget::empirical_accuracy, a, b);
  const auto var_b = variance_decomposition(ds, ProbeTarget::verbalized_confidence, b, a);
  o.detail << "ortho_err=" << ortho_err << " self_after=(" << self_a.r2_after << ","
           << self_b.r2_after << ") retention=(" << cross_a.ratio.value_or(NAN) << ","
           << cross_b.ratio.value_or(NAN) << ") shared=(" << var_a.shared << ","
           << var_b.shared << ")";
  o.require(ortho_err <= 1e-8, "bases orthonormal to 1e-8");
  o.require(self_a.r2_after <= 0.01 && self_b.r2_after <= 0.01, "self-removal R2 <= 0.01");
  o.require(cross_a.ratio.value_or(0) >= 0.9 && cross_b.ratio.value_or(0) >= 0.9,
            "cross retention >= 0.9");
  o.require(var_a.shared <= 0.05 && var_b.shared <= 0.05, "shared R2 <= 0.05");
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void p10(Outcome &o) {
  testutil::TempDir tmp("accept");
  const auto ds = testutil::tiny_dataset(40, 3, 5, 10);
  write_dataset(ds, tmp / "d");
  const bool round_trip = read_dataset(tmp / "d") == ds;
  o.require(round_trip, "bit-exact round trip");

  const auto path = tmp / "d" / kActivationsFile;
  const std::string original = slurp(path);
  int undetected = 0, flips = 0;
  for (std::size_t i = 0; i < original.size(); ++i)
    for (unsigned char mask : {0x01, 0x10, 0x80, 0xFF}) {
      std::string bad = original;
      bad[i] = static_cast<char>(bad[i] ^ mask);
      std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
      ++flips;
      try {
        read_dataset(tmp / "d");
        ++undetected;
      } catch (const ValidationError &) {
      }
    }
  std::ofstream(path, std::ios::binary | std::ios::trunc) << original.substr(4);
  bool truncation_caught = false;
  try {
    read_dataset(tmp / "d");
  } catch (const ValidationError &) {
    truncation_caught = true;
  }
  o.require(undetected == 0, "all single-byte corruptions rejected");
  o.require(truncation_caught, "truncated payload rejected");

  const auto big = testutil::tiny_dataset(1000, 2, 2, 11);
  const auto s1 = split_by_question(big, {}, 12), s2 = split_by_question(big, {}, 12);
  std::map<std::string, Split> seen;
  bool grouped = true;
  for (const auto &m : s1.meta) {
    const auto [it, fresh] = seen.emplace(m.question_id, *m.split);
    grouped &= fresh || it->second == *m.split;
  }
  o.require(s1 == s2, "deterministic splits");
  o.require(grouped, "questions never straddle splits");
  o.detail << "round_trip=" << round_trip << " corruptions=" << flips
           << " undetected=" << undetected << " deterministic=" << (s1 == s2)
           << " grouped=" << grouped;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome &)>>> criteria = {
      {"P1", p1}, {"P2", p2}, {"P3", p3}, {"P4", p4}, {"P5", p5},
      {"P6", p6}, {"P7", p7}, {"P8", p8}, {"P9", p9}, {"P10", p10},
  };
  int failed = 0;
  for (const auto &[name, fn] : criteria) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("%s %s %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
