#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bestanp/estimator.hpp"
#include "bestanp/geometry.hpp"
#include "bestanp/random.hpp"
#include "bestanp/sonar_model.hpp"

namespace bestanp {

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;

  std::size_t size() const { return poses.size(); }
  // Equal lengths and strictly increasing timestamps, else kBadParams.
  void validate() const;
  Trajectory prefix(std::size_t count) const;
};

struct MapPoint {
  Vec3 position = Vec3::Zero();
  int observations = 0;
  double last_residual = 0.0;
};

class MapStore {
 public:
  // Throws kBadParams on a duplicate id.
  void insert(std::size_t id, const MapPoint& point);
  bool contains(std::size_t id) const { return points_.count(id) != 0; }
  void erase(std::size_t id) { points_.erase(id); }
  MapPoint& at(std::size_t id) { return points_.at(id); }
  const MapPoint& at(std::size_t id) const { return points_.at(id); }
  std::size_t size() const { return points_.size(); }
  const std::map<std::size_t, MapPoint>& points() const { return points_; }

 private:
  std::map<std::size_t, MapPoint> points_;
};

struct OdometryConfig {
  int init_frames = 2;
  double init_sigma_rot = deg_to_rad(0.5);  // body-frame perturbation of the provided poses
  double init_sigma_trans = 0.01;
  int min_track_points = 6;
  // <= 0 selects point_gate_threshold per point, with the init pose sigmas as
  // the pose uncertainty
  double gate_threshold = 0.0;
  // Tracking drops map points reprojecting worse than factor * gate and
  // re-estimates, at most this many times per frame.
  int outlier_rounds = 3;
  double track_gate_factor = 3.0;
  // New points whose triangulation dilution exceeds this are not mapped; <= 0 disables.
  double max_dilution = 0.0;
  FovSpec fov;
  NoiseModel noise{1e-3, 1e-3, NoiseMechanism::kOnTangent, 0};
  EstimatorOptions estimator;
  double abnormal_jump_factor = 10.0;

  void validate() const;
};

struct TrajectoryErrors {
  double ate_t = 0.0;
  double ate_r = 0.0;  // degrees
  double rpe_t = 0.0;
  double rpe_r = 0.0;  // degrees
};

enum class Termination { kCompleted, kTrackingLost, kAbnormalJump, kEstimatorFailure };

std::string to_string(Termination t);

struct FrameRecord {
  std::size_t frame = 0;
  Pose pose;
  double ml_cost = 0.0;  // zero for provided initialization frames
  int n_points = 0;
};

struct OdometryResult {
  Trajectory estimate;  // completed prefix
  MapStore map;
  TrajectoryErrors errors;
  std::vector<FrameRecord> frames;
  Termination termination = Termination::kCompleted;
  std::size_t terminated_at = 0;  // first frame not estimated; == truth size when completed
  std::string message;
};

// Measurement noise for (frame, point id) comes from its own substream, so the
// result does not depend on visiting order.
OdometryResult run_odometry(std::span<const Vec3> scene_points, const Trajectory& truth,
                            const OdometryConfig& cfg, RandomStream& stream);

// RMS of translation error (m) and geodesic rotation error (deg), no alignment.
std::pair<double, double> compute_ate(const Trajectory& truth, const Trajectory& estimate);

std::pair<double, double> compute_rpe(const Trajectory& truth, const Trajectory& estimate,
                                      std::size_t delta = 1);

enum class TrajectoryShape { kEightShaped, kCircle, kFromFile };

struct TrajectoryParams {
  TrajectoryShape shape = TrajectoryShape::kEightShaped;
  double scale = 2.0;  // radius for the circle, half-width for the eight
  int frames = 200;
  double duration = 40.0;  // seconds for one period
  double height = 0.0;
  double pitch = deg_to_rad(20.0);  // sonar tilted down about its y axis
  double phase = 0.0;               // curve parameter of the first frame
  std::vector<Pose> poses;          // kFromFile
  std::vector<double> timestamps;   // kFromFile, optional
};

// One closed period: tau_k = phase + 2 pi k / (frames - 1). The sonar x axis follows
// the horizontal velocity, then pitches down.
Trajectory generate_trajectory(const TrajectoryParams& params);

struct SceneParams {
  double target_visible = 50.0;
  double tolerance = 5.0;
  int max_iterations = 30;
  // Virtual seabed z = -depth + relief * sin(x / wavelength) * cos(y / wavelength)
  // plus uniform jitter of +-jitter. depth <= 0 places the mean surface where
  // the mean sonar boresight meets it at half the maximum range.
  double depth = 0.0;
  double relief = 0.5;
  double wavelength = 1.5;
  double jitter = 0.25;
};

// Points scattered on a virtual surface around the trajectory. The count is
// rescaled until the median number in FOV per frame falls within
// target +- tolerance, else kDegenerateScene.
std::vector<Vec3> generate_odometry_scene(const Trajectory& truth, const FovSpec& fov,
                                          RandomStream& stream, const SceneParams& params = {});

std::vector<int> visible_counts(std::span<const Vec3> scene_points, const Trajectory& truth,
                                const FovSpec& fov);

}  // namespace bestanp
