#include "bestanp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "bestanp/error.hpp"

namespace bestanp {
namespace {

using Clock = std::chrono::steady_clock;

TrialOutcome run_one_trial(const TrialSpec& spec, int trial) {
  RandomStream stream = RandomStream::derive(
      spec.seed, {spec.stream_index, static_cast<std::uint64_t>(trial)});
  TrialOutcome out;
  try {
    const Pose truth = sample_pose(stream);
    const std::vector<Vec3> points = generate_scene(spec.n, spec.fov, truth, stream);
    CorrespondenceSet corr;
    corr.world_points = points;
    corr.measurements.reserve(points.size());
    for (const Vec3& p : points) {
      corr.measurements.push_back(
          apply_noise(project_ideal(truth, p).measurement, spec.noise, stream));
    }

    const auto start = Clock::now();
    const EstimateReport report = bestanp(corr, spec.estimator);
    out.runtime = std::chrono::duration<double>(Clock::now() - start).count();

    out.sq_err_t = (report.pose_gn.translation - truth.translation).squaredNorm();
    out.sq_err_r = so3_log(truth.rotation.transpose() * report.pose_gn.rotation).squaredNorm();
    out.sq_err_t_be = (report.pose_be.translation - truth.translation).squaredNorm();
    out.sq_err_r_be = so3_log(truth.rotation.transpose() * report.pose_be.rotation).squaredNorm();
    out.sigma_d_sq_hat = report.t_be.sigma_d_sq_hat;
    out.sigma_theta_sq_hat = report.r_be.sigma_theta_sq_hat;
    if (spec.with_crlb) {
      const CrlbMatrix crlb =
          compute_crlb(points, truth, spec.noise.sigma_d, spec.noise.sigma_theta);
      out.crlb_trace_t = crlb.cov_bound.bottomRightCorner<3, 3>().trace();
      out.crlb_trace_r = crlb.cov_bound.topLeftCorner<3, 3>().trace();
    }
  } catch (const Error&) {
    out = TrialOutcome{};
    out.failed = true;
  }
  return out;
}

FovSpec fov_for_alpha(const FovSpec& base, double alpha) {
  FovSpec fov = base;
  fov.azimuth_halfwidth = deg_to_rad(3.0 * alpha);
  fov.elevation_halfwidth = deg_to_rad(alpha);
  return fov;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trials < 1) throw Error(ErrorCode::kBadParams, "trials must be >= 1");
  if (sweep_values.empty()) throw Error(ErrorCode::kBadParams, "sweep_values must be non-empty");
  if (!std::is_sorted(sweep_values.begin(), sweep_values.end())) {
    throw Error(ErrorCode::kBadParams, "sweep_values must be sorted");
  }
  if (base_n < 1) throw Error(ErrorCode::kBadParams, "n must be >= 1");
  fov.validate();
}

std::vector<Vec3> generate_scene(int n, const FovSpec& fov, const Pose& pose,
                                 RandomStream& stream) {
  if (n < 1) throw Error(ErrorCode::kBadParams, "scene needs at least one point");
  fov.validate();
  const double d_lo = std::min(kSceneMinDistance, fov.max_distance);
  std::vector<Vec3> points(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Vec3& p : points) {
      const SphericalCoords c{stream.uniform(d_lo, fov.max_distance),
                              stream.uniform(-fov.azimuth_halfwidth, fov.azimuth_halfwidth),
                              stream.uniform(-fov.elevation_halfwidth, fov.elevation_halfwidth)};
      p = pose.to_world(cartesian_of(c));
    }
    if (n < 4 || coplanarity_ratio(points) > kCoplanarityThreshold) return points;
  }
  throw Error(ErrorCode::kDegenerateScene, "could not draw a non-coplanar scene in 100 attempts");
}

Pose sample_pose(RandomStream& stream) {
  const Vec3 axis = stream.unit_vector();
  const double angle = stream.uniform(0.0, std::numbers::pi / 4);
  Pose pose;
  pose.rotation = so3_exp(angle * axis);
  pose.translation = {stream.uniform(-2.0, 2.0), stream.uniform(-2.0, 2.0),
                      stream.uniform(-2.0, 2.0)};
  return pose;
}

RmsePair rmse(std::span<const Pose> estimates, const Pose& truth) {
  if (estimates.empty()) throw Error(ErrorCode::kBadParams, "rmse of an empty batch");
  double st = 0.0;
  double sr = 0.0;
  for (const Pose& e : estimates) {
    st += (e.translation - truth.translation).squaredNorm();
    sr += so3_log(truth.rotation.transpose() * e.rotation).squaredNorm();
  }
  const auto t = static_cast<double>(estimates.size());
  return {std::sqrt(st / t), std::sqrt(sr / t)};
}

std::vector<TrialOutcome> run_trials(const TrialSpec& spec) {
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(std::max(spec.trials, 0)));
#pragma omp parallel for schedule(dynamic, 4)
  for (int k = 0; k < spec.trials; ++k) {
    outcomes[static_cast<std::size_t>(k)] = run_one_trial(spec, k);
  }
  return outcomes;
}

ResultRow summarize(double sweep_value, std::span<const TrialOutcome> outcomes) {
  ResultRow row;
  row.sweep_value = sweep_value;
  row.trials = static_cast<int>(outcomes.size());
  double st = 0.0, sr = 0.0, ct = 0.0, cr = 0.0, rt = 0.0;
  for (const TrialOutcome& o : outcomes) {
    if (o.failed) {
      ++row.failures;
      continue;
    }
    st += o.sq_err_t;
    sr += o.sq_err_r;
    ct += o.crlb_trace_t;
    cr += o.crlb_trace_r;
    rt += o.runtime;
  }
  const int ok = row.trials - row.failures;
  if (ok > 0) {
    const double k = ok;
    row.rmse_t = std::sqrt(st / k);
    row.rmse_r = std::sqrt(sr / k);
    row.crlb_t = std::sqrt(ct / k);
    row.crlb_r = std::sqrt(cr / k);
    row.mean_runtime = rt / k;
  }
  return row;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
    const double value = cfg.sweep_values[i];
    TrialSpec spec;
    spec.n = cfg.base_n;
    spec.noise = cfg.base_noise;
    spec.fov = cfg.fov;
    spec.estimator = cfg.estimator;
    spec.trials = cfg.trials;
    spec.seed = cfg.seed;
    spec.stream_index = i;

    switch (cfg.sweep_kind) {
      case SweepKind::kNoise:
        spec.noise.sigma_d = spec.noise.sigma_theta = value;
        break;
      case SweepKind::kPointCount:
      case SweepKind::kTiming:
        spec.n = static_cast<int>(std::lround(value));
        break;
      case SweepKind::kFov:
        spec.fov = fov_for_alpha(cfg.fov, value);
        break;
      case SweepKind::kGnIterations:
        spec.estimator.gn_iterations = static_cast<int>(std::lround(value));
        break;
      case SweepKind::kNoiseMechanism:
        spec.noise.sigma_d = spec.noise.sigma_theta = value;
        // Both mechanisms share the substream, so trials are paired.
        for (const auto mechanism : {NoiseMechanism::kOnTangent, NoiseMechanism::kOnAngle}) {
          spec.noise.mechanism = mechanism;
          ResultRow row = summarize(value, run_trials(spec));
          row.variant = mechanism == NoiseMechanism::kOnTangent ? "tangent" : "angle";
          rows.push_back(std::move(row));
        }
        continue;
    }
    rows.push_back(summarize(value, run_trials(spec)));
  }
  return rows;
}

std::vector<TimingRow> run_timing(std::span<const int> n_values, int repetitions,
                                  std::uint64_t seed) {
  constexpr int kGroups = 10;
  const int per_group = std::max(1, repetitions / kGroups);
  std::vector<TimingRow> rows;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const int n = n_values[i];
    RandomStream stream = RandomStream::derive(seed, {i});
    const Pose truth = sample_pose(stream);
    const NoiseModel noise{1e-3, 1e-3, NoiseMechanism::kOnTangent, seed};
    CorrespondenceSet corr;
    corr.world_points = generate_scene(n, FovSpec{}, truth, stream);
    for (const Vec3& p : corr.world_points) {
      corr.measurements.push_back(apply_noise(project_ideal(truth, p).measurement, noise, stream));
    }
    (void)bestanp(corr);  // warm-up

    std::vector<double> group_means;
    for (int g = 0; g < kGroups; ++g) {
      const auto start = Clock::now();
      for (int r = 0; r < per_group; ++r) {
        const EstimateReport report = bestanp(corr);
        asm volatile("" : : "g"(&report) : "memory");
      }
      group_means.push_back(std::chrono::duration<double>(Clock::now() - start).count() /
                            per_group);
    }
    std::nth_element(group_means.begin(), group_means.begin() + kGroups / 2, group_means.end());
    rows.push_back({n, group_means[kGroups / 2]});
  }
  return rows;
}

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::kNoise: return "noise";
    case SweepKind::kPointCount: return "point_count";
    case SweepKind::kFov: return "fov";
    case SweepKind::kNoiseMechanism: return "noise_mechanism";
    case SweepKind::kGnIterations: return "gn_iterations";
    case SweepKind::kTiming: return "timing";
  }
  return "unknown";
}

SweepKind sweep_kind_from_string(const std::string& name) {
  for (const auto kind : {SweepKind::kNoise, SweepKind::kPointCount, SweepKind::kFov,
                          SweepKind::kNoiseMechanism, SweepKind::kGnIterations,
                          SweepKind::kTiming}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error(ErrorCode::kBadParams, "unknown sweep kind '" + name + "'");
}

}  // namespace bestanp
