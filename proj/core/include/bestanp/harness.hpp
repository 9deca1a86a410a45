#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bestanp/estimator.hpp"
#include "bestanp/geometry.hpp"
#include "bestanp/random.hpp"
#include "bestanp/sonar_model.hpp"

namespace bestanp {

enum class SweepKind { kNoise, kPointCount, kFov, kNoiseMechanism, kGnIterations, kTiming };

struct ExperimentConfig {
  SweepKind sweep_kind = SweepKind::kPointCount;
  std::vector<double> sweep_values;
  int trials = 1000;
  NoiseModel base_noise{1e-3, 1e-3, NoiseMechanism::kOnTangent, 0};
  int base_n = 14;
  FovSpec fov;
  std::uint64_t seed = 0;
  EstimatorOptions estimator;

  void validate() const;
};

struct ResultRow {
  double sweep_value = 0.0;
  std::string variant;  // "tangent"/"angle" for noise-mechanism sweeps, else empty
  double rmse_t = 0.0;
  double rmse_r = 0.0;
  // Root of the mean CRLB block trace over successful trials.
  double crlb_t = 0.0;
  double crlb_r = 0.0;
  double mean_runtime = 0.0;  // seconds per bestanp call
  int failures = 0;
  int trials = 0;
};

// Fully specified Monte Carlo setting for one sweep value.
struct TrialSpec {
  int n = 14;
  NoiseModel noise{1e-3, 1e-3, NoiseMechanism::kOnTangent, 0};
  FovSpec fov;
  EstimatorOptions estimator;
  int trials = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
  bool with_crlb = true;
};

struct TrialOutcome {
  bool failed = false;
  double sq_err_t = 0.0;
  double sq_err_r = 0.0;
  double sq_err_t_be = 0.0;
  double sq_err_r_be = 0.0;
  double crlb_trace_t = 0.0;
  double crlb_trace_r = 0.0;
  double sigma_d_sq_hat = 0.0;
  double sigma_theta_sq_hat = 0.0;
  double runtime = 0.0;
};

// Uniform in (d, theta, phi) over the FOV box with d in [0.5, max_distance],
// mapped to the world by `pose`. Batches failing the coplanarity check are
// redrawn up to 100 times, then kDegenerateScene.
std::vector<Vec3> generate_scene(int n, const FovSpec& fov, const Pose& pose,
                                 RandomStream& stream);

inline constexpr double kSceneMinDistance = 0.5;

// Rotation exp(angle * axis) with uniform axis and angle in [0, pi/4];
// translation uniform in [-2, 2]^3.
Pose sample_pose(RandomStream& stream);

struct RmsePair {
  double t = 0.0;
  double r = 0.0;
};

RmsePair rmse(std::span<const Pose> estimates, const Pose& truth);

// One fresh pose, scene and noise draw per trial, each from the substream
// (seed, stream_index, trial). Trials run in parallel; output is in trial order.
std::vector<TrialOutcome> run_trials(const TrialSpec& spec);

ResultRow summarize(double sweep_value, std::span<const TrialOutcome> outcomes);

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg);

struct TimingRow {
  int n = 0;
  double mean_seconds = 0.0;
};

// Median over groups of the mean bestanp wall-clock time, single-threaded,
// data generated beforehand.
std::vector<TimingRow> run_timing(std::span<const int> n_values, int repetitions,
                                  std::uint64_t seed = 0);

std::string to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& name);

}  // namespace bestanp
