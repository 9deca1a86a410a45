#include "bestanp/odometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "bestanp/error.hpp"
#include "bestanp/triangulation.hpp"

namespace bestanp {
namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

void check_same_length(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch, "trajectories differ in length (" +
                                                std::to_string(a.size()) + " vs " +
                                                std::to_string(b.size()) + ")");
  }
}

Pose heading_pose(const Vec3& position, double yaw, double pitch) {
  Pose pose;
  pose.rotation = so3_exp(yaw * Vec3::UnitZ()) * so3_exp(pitch * Vec3::UnitY());
  pose.translation = position;
  return pose;
}

}  // namespace

void Trajectory::validate() const {
  if (poses.size() != timestamps.size()) {
    throw Error(ErrorCode::kLengthMismatch, "trajectory poses and timestamps differ in length");
  }
  for (std::size_t k = 1; k < timestamps.size(); ++k) {
    if (!(timestamps[k] > timestamps[k - 1])) {
      throw Error(ErrorCode::kBadParams, "timestamps must be strictly increasing (frame " +
                                             std::to_string(k) + ")");
    }
  }
}

Trajectory Trajectory::prefix(std::size_t count) const {
  count = std::min(count, poses.size());
  Trajectory out;
  out.poses.assign(poses.begin(), poses.begin() + static_cast<std::ptrdiff_t>(count));
  out.timestamps.assign(timestamps.begin(),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

void MapStore::insert(std::size_t id, const MapPoint& point) {
  if (!points_.emplace(id, point).second) {
    throw Error(ErrorCode::kBadParams, "map point " + std::to_string(id) + " already exists");
  }
}

void OdometryConfig::validate() const {
  if (init_frames < 2) throw Error(ErrorCode::kBadParams, "init_frames must be >= 2");
  if (min_track_points < static_cast<int>(kMinPointsFullPose)) {
    throw Error(ErrorCode::kBadParams, "min_track_points must be >= 6");
  }
  if (init_sigma_rot < 0 || init_sigma_trans < 0 || noise.sigma_d < 0 || noise.sigma_theta < 0) {
    throw Error(ErrorCode::kBadParams, "noise levels must be non-negative");
  }
  if (outlier_rounds < 0 || !(track_gate_factor > 0)) {
    throw Error(ErrorCode::kBadParams, "outlier_rounds must be >= 0 and track_gate_factor > 0");
  }
  if (!(abnormal_jump_factor > 1.0)) {
    throw Error(ErrorCode::kBadParams, "abnormal_jump_factor must exceed 1");
  }
  fov.validate();
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kCompleted: return "completed";
    case Termination::kTrackingLost: return "tracking_lost";
    case Termination::kAbnormalJump: return "abnormal_jump";
    case Termination::kEstimatorFailure: return "estimator_failure";
  }
  return "unknown";
}

OdometryResult run_odometry(std::span<const Vec3> scene_points, const Trajectory& truth,
                            const OdometryConfig& cfg, RandomStream& stream) {
  cfg.validate();
  truth.validate();
  const std::size_t n_frames = truth.size();
  if (n_frames < static_cast<std::size_t>(cfg.init_frames)) {
    throw Error(ErrorCode::kBadParams, "trajectory shorter than init_frames");
  }
  auto gate_at = [&cfg](double distance) {
    return cfg.gate_threshold > 0
               ? cfg.gate_threshold
               : point_gate_threshold(cfg.noise, distance, cfg.init_sigma_rot, cfg.init_sigma_trans);
  };
  const std::uint64_t noise_seed = stream.next_u64();

  std::vector<std::vector<std::size_t>> visible(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    for (std::size_t id = 0; id < scene_points.size(); ++id) {
      if (in_fov(truth.poses[k], scene_points[id], cfg.fov)) visible[k].push_back(id);
    }
  }
  auto measure = [&](std::size_t k, std::size_t id) {
    RandomStream s = RandomStream::derive(noise_seed, {k, id});
    return apply_noise(project_ideal(truth.poses[k], scene_points[id]).measurement, cfg.noise, s);
  };

  OdometryResult result;
  std::vector<Pose>& est = result.estimate.poses;

  auto triangulate_new = [&](std::size_t k) {
    const auto& prev = visible[k - 1];
    for (std::size_t id : visible[k]) {
      if (result.map.contains(id) || !std::binary_search(prev.begin(), prev.end(), id)) continue;
      try {
        const SonarMeasurement ma = measure(k - 1, id);
        const SonarMeasurement mb = measure(k, id);
        const TriangulatedPoint tp = triangulate_two_view({est[k - 1], est[k], ma, mb});
        if (tp.mirror_ambiguous || (cfg.max_dilution > 0 && tp.dilution > cfg.max_dilution) ||
            !gate_point(tp, gate_at(std::max(ma.distance, mb.distance)))) {
          continue;
        }
        result.map.insert(id, {tp.point, 2, tp.residual_reprojection});
      } catch (const Error&) {
        // unusable geometry for this pair; the point may enter later
      }
    }
  };

  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.init_frames); ++k) {
    const Vec3 dr(stream.normal(cfg.init_sigma_rot), stream.normal(cfg.init_sigma_rot),
                  stream.normal(cfg.init_sigma_rot));
    const Vec3 dt(stream.normal(cfg.init_sigma_trans), stream.normal(cfg.init_sigma_trans),
                  stream.normal(cfg.init_sigma_trans));
    Pose delta;
    delta.rotation = so3_exp(dr);
    delta.translation = dt;
    est.push_back(truth.poses[k] * delta);
    result.estimate.timestamps.push_back(truth.timestamps[k]);
    result.frames.push_back({k, est.back(), 0.0, 0});
    if (k > 0) triangulate_new(k);
  }

  std::vector<double> steps;
  for (std::size_t k = 1; k < est.size(); ++k) {
    steps.push_back((est[k].translation - est[k - 1].translation).norm());
  }

  result.terminated_at = n_frames;
  for (std::size_t k = static_cast<std::size_t>(cfg.init_frames); k < n_frames; ++k) {
    CorrespondenceSet corr;
    std::vector<std::size_t> used;
    for (std::size_t id : visible[k]) {
      if (!result.map.contains(id)) continue;
      corr.world_points.push_back(result.map.at(id).position);
      corr.measurements.push_back(measure(k, id));
      used.push_back(id);
    }
    EstimateReport report;
    bool ok = false;
    for (int round = 0;; ++round) {
      if (corr.size() < static_cast<std::size_t>(cfg.min_track_points)) {
        result.termination = Termination::kTrackingLost;
        result.message = "frame " + std::to_string(k) + ": " + std::to_string(corr.size()) +
                         " map points visible, need " + std::to_string(cfg.min_track_points);
        break;
      }
      try {
        report = bestanp(corr, cfg.estimator);
      } catch (const Error& e) {
        result.termination = Termination::kEstimatorFailure;
        result.message = "frame " + std::to_string(k) + ": " + e.what();
        break;
      }
      if (round == cfg.outlier_rounds) {
        ok = true;
        break;
      }
      // map points that no longer reproject are dropped and the pose redone
      CorrespondenceSet kept;
      std::vector<std::size_t> kept_ids;
      for (std::size_t i = 0; i < used.size(); ++i) {
        const double limit = cfg.track_gate_factor * gate_at(corr.measurements[i].distance);
        if (reprojection_error(report.pose_gn, corr.world_points[i],
                               corr.measurements[i].image_point()) > limit) {
          result.map.erase(used[i]);
          continue;
        }
        kept.world_points.push_back(corr.world_points[i]);
        kept.measurements.push_back(corr.measurements[i]);
        kept_ids.push_back(used[i]);
      }
      if (kept_ids.size() == used.size()) {
        ok = true;
        break;
      }
      corr = std::move(kept);
      used = std::move(kept_ids);
    }
    if (!ok) {
      result.terminated_at = k;
      break;
    }
    const Pose& pose = report.pose_gn;
    const double step = (pose.translation - est.back().translation).norm();
    const double typical = median_of(steps);
    if (typical > 0 && step > cfg.abnormal_jump_factor * typical) {
      result.termination = Termination::kAbnormalJump;
      result.terminated_at = k;
      result.message = "frame " + std::to_string(k) + ": translation jump " +
                       std::to_string(step) + " m";
      break;
    }
    steps.push_back(step);
    est.push_back(pose);
    result.estimate.timestamps.push_back(truth.timestamps[k]);
    result.frames.push_back({k, pose, report.ml_cost_final, static_cast<int>(corr.size())});
    for (std::size_t i = 0; i < used.size(); ++i) {
      MapPoint& mp = result.map.at(used[i]);
      ++mp.observations;
      mp.last_residual =
          reprojection_error(pose, mp.position, corr.measurements[i].image_point());
    }
    triangulate_new(k);
  }

  const Trajectory truth_prefix = truth.prefix(est.size());
  const auto [ate_t, ate_r] = compute_ate(truth_prefix, result.estimate);
  result.errors.ate_t = ate_t;
  result.errors.ate_r = ate_r;
  if (est.size() >= 2) {
    const auto [rpe_t, rpe_r] = compute_rpe(truth_prefix, result.estimate);
    result.errors.rpe_t = rpe_t;
    result.errors.rpe_r = rpe_r;
  }
  return result;
}

std::pair<double, double> compute_ate(const Trajectory& truth, const Trajectory& estimate) {
  check_same_length(truth, estimate);
  if (truth.size() == 0) return {0.0, 0.0};
  double st = 0.0;
  double sr = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    st += (estimate.poses[k].translation - truth.poses[k].translation).squaredNorm();
    const double e = rad_to_deg(geodesic_error(estimate.poses[k].rotation, truth.poses[k].rotation));
    sr += e * e;
  }
  const auto n = static_cast<double>(truth.size());
  return {std::sqrt(st / n), std::sqrt(sr / n)};
}

std::pair<double, double> compute_rpe(const Trajectory& truth, const Trajectory& estimate,
                                      std::size_t delta) {
  check_same_length(truth, estimate);
  if (delta == 0 || truth.size() < delta + 1) {
    throw Error(ErrorCode::kLengthMismatch, "RPE needs at least delta + 1 frames");
  }
  double st = 0.0;
  double sr = 0.0;
  const std::size_t count = truth.size() - delta;
  for (std::size_t k = 0; k < count; ++k) {
    const Pose rel_true = truth.poses[k].inverse() * truth.poses[k + delta];
    const Pose rel_est = estimate.poses[k].inverse() * estimate.poses[k + delta];
    const Pose err = rel_true.inverse() * rel_est;
    st += err.translation.squaredNorm();
    const double e = rad_to_deg(geodesic_error(err.rotation, Mat3::Identity()));
    sr += e * e;
  }
  const auto n = static_cast<double>(count);
  return {std::sqrt(st / n), std::sqrt(sr / n)};
}

Trajectory generate_trajectory(const TrajectoryParams& params) {
  Trajectory traj;
  if (params.shape == TrajectoryShape::kFromFile) {
    if (params.poses.empty()) throw Error(ErrorCode::kBadParams, "pose list is empty");
    traj.poses = params.poses;
    if (params.timestamps.empty()) {
      for (std::size_t k = 0; k < params.poses.size(); ++k) {
        traj.timestamps.push_back(static_cast<double>(k));
      }
    } else {
      traj.timestamps = params.timestamps;
    }
    traj.validate();
    return traj;
  }
  if (!(params.scale > 0)) throw Error(ErrorCode::kBadParams, "trajectory scale must be > 0");
  if (params.frames < 3) throw Error(ErrorCode::kBadParams, "trajectory needs >= 3 frames");
  if (!(params.duration > 0)) throw Error(ErrorCode::kBadParams, "duration must be > 0");

  const double dt = params.duration / (params.frames - 1);
  for (int k = 0; k < params.frames; ++k) {
    const double tau = params.phase + 2.0 * std::numbers::pi * k / (params.frames - 1);
    Vec3 position;
    double vx = 0.0;
    double vy = 0.0;
    if (params.shape == TrajectoryShape::kEightShaped) {
      position = {params.scale * std::sin(tau), params.scale * std::sin(tau) * std::cos(tau),
                  params.height};
      vx = std::cos(tau);
      vy = std::cos(2.0 * tau);
    } else {
      position = {params.scale * std::cos(tau), params.scale * std::sin(tau), params.height};
      vx = -std::sin(tau);
      vy = std::cos(tau);
    }
    traj.poses.push_back(heading_pose(position, std::atan2(vy, vx), params.pitch));
    traj.timestamps.push_back(k * dt);
  }
  return traj;
}

std::vector<int> visible_counts(std::span<const Vec3> scene_points, const Trajectory& truth,
                                const FovSpec& fov) {
  std::vector<int> counts;
  counts.reserve(truth.size());
  for (const Pose& pose : truth.poses) {
    int c = 0;
    for (const Vec3& p : scene_points) c += in_fov(pose, p, fov) ? 1 : 0;
    counts.push_back(c);
  }
  return counts;
}

std::vector<Vec3> generate_odometry_scene(const Trajectory& truth, const FovSpec& fov,
                                          RandomStream& stream, const SceneParams& params) {
  if (truth.size() == 0) throw Error(ErrorCode::kBadParams, "empty trajectory");
  if (!(params.wavelength > 0) || params.relief < 0 || params.jitter < 0) {
    throw Error(ErrorCode::kBadParams, "scene relief parameters out of range");
  }
  fov.validate();

  double depth = params.depth;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  double mean_z = 0.0;
  double mean_drop = 0.0;
  for (const Pose& pose : truth.poses) {
    lo = lo.cwiseMin(pose.translation);
    hi = hi.cwiseMax(pose.translation);
    mean_z += pose.translation.z();
    mean_drop += -pose.rotation.col(0).z();
  }
  mean_z /= static_cast<double>(truth.size());
  mean_drop /= static_cast<double>(truth.size());
  if (depth <= 0) depth = std::max(0.5 * fov.max_distance * mean_drop, 0.25) - mean_z;
  const Vec3 pad(fov.max_distance, fov.max_distance, 0.0);
  lo -= pad;
  hi += pad;

  auto surface = [&](double x, double y) {
    return -depth + params.relief * std::sin(x / params.wavelength) * std::cos(y / params.wavelength);
  };

  double count = 1000.0;
  std::vector<Vec3> points;
  for (int it = 0; it < params.max_iterations; ++it) {
    points.resize(static_cast<std::size_t>(std::max(1.0, std::round(count))));
    for (Vec3& p : points) {
      const double x = stream.uniform(lo.x(), hi.x());
      const double y = stream.uniform(lo.y(), hi.y());
      p = {x, y, surface(x, y) + stream.uniform(-params.jitter, params.jitter)};
    }
    const std::vector<int> counts = visible_counts(points, truth, fov);
    const double med = median_of(std::vector<double>(counts.begin(), counts.end()));
    if (std::abs(med - params.target_visible) <= params.tolerance) return points;
    count *= params.target_visible / std::max(med, 1.0);
  }
  throw Error(ErrorCode::kDegenerateScene, "scene density tuner did not converge");
}

}  // namespace bestanp
