#pragma once

#include "confsteer/activation_store.hpp"
#include "confsteer/numerics/calibration.hpp"
#include "confsteer/rng.hpp"
#include "confsteer/steering.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace confsteer {

/// Synthetic activations with planted accuracy and confidence directions.
///
/// Per question q: a_q ~ U(0,1) and
/// c_q = clamp(coupling * a_q + confidence_bias + N(0, confidence_noise), 0, 1).
/// Rows depend on the condition: pure_correctness encodes a_q u,
/// pure_confidence encodes c_q v, joint encodes both; every row adds
/// N(0, noise_sigma^2 I). Latents are shared across layers and conditions for
/// one seed; directions are drawn per layer.
struct SynthConfig {
  Eigen::Index dim = 32;
  int n_questions = 500;
  int rows_per_question = 8;
  double planted_cosine = 0.0;
  double noise_sigma = 0.1;
  double confidence_bias = 0.5;
  double response_gain = 0.3;
  std::uint64_t seed = 0;

  double confidence_coupling = 0.4;
  double confidence_noise = 0.05;
  double response_noise = 0.02;
  //! Framing k of K=11 shifts c_q by spread * (2(k-1)/(K-1) - 1).
  double framing_spread = 0.0;
  int samples_per_question = 50;

  Condition condition = Condition::joint;
  int layer = 0;
  std::string model_id = "synthetic";

  void validate() const;
};

inline constexpr int kNumFramings = 11;

struct GroundTruth {
  VectorXd u; // accuracy direction, unit
  VectorXd v; // confidence direction, unit
  std::vector<std::string> question_ids;
  VectorXd accuracy;   // a_q
  VectorXd confidence; // c_q (framing-free baseline)
};

struct SynthOutput {
  ActivationDataset dataset;
  GroundTruth truth;
};

SynthOutput generate(const SynthConfig &cfg);

/// Verbalized confidence after steering with strength alpha.
double simulate_response(double c_q, double alpha, const SynthConfig &cfg, Xoshiro256 &rng);

struct ClosedLoopReport {
  double ece_unsteered = 0;
  double ece_steered = 0;
  CalibrationReport unsteered;
  CalibrationReport steered;
  TransferFunction transfer;
  SteeringPlan plan;
  VectorXd accuracy;   // test questions, plan order
  VectorXd baseline;   // c_q
  VectorXd steered_mean;
};

/// End-to-end: probe on train, isotonic calibration on val, transfer sweep on
/// val questions through simulate_response, per-question plan on test, then
/// ECE of unsteered and steered confidence against a_q. Uses the
/// pure_correctness encoding regardless of cfg.condition.
ClosedLoopReport run_pipeline_closed_loop(const SynthConfig &cfg);

} // namespace confsteer
