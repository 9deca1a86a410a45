#pragma once

#include "bestanp/geometry.hpp"
#include "bestanp/sonar_model.hpp"

namespace bestanp {

struct TwoViewObservation {
  Pose pose_a;
  Pose pose_b;
  SonarMeasurement meas_a;
  SonarMeasurement meas_b;
};

struct TriangulatedPoint {
  Vec3 point = Vec3::Zero();
  double residual_distance = 0.0;      // RMS of the two range residuals
  double residual_reprojection = 0.0;  // RMS image-plane error over both views
  // Another admissible minimizer along the plane-intersection line has a
  // combined residual within kMirrorTieTolerance (elevation mirror).
  bool mirror_ambiguous = false;
  // Largest position standard deviation per unit of isotropic image-plane
  // noise, from the two-view Jacobian at the solution.
  double dilution = 0.0;
};

inline constexpr double kMinPlaneAngle = 1e-3;
inline constexpr double kMinBaseline = 1e-6;
inline constexpr double kMirrorTieTolerance = 1e-6;

// Each azimuth confines the point to a plane through the sonar origin; the two
// planes meet in a line, along which the point minimizes the squared range
// residuals of both views. Throws kParallelPlanes, kBadParams (baseline too
// short) or kNoForwardSolution.
TriangulatedPoint triangulate_two_view(const TwoViewObservation& obs);

bool gate_point(const TriangulatedPoint& p, double threshold);

inline constexpr double kMinGateThreshold = 1e-6;

// Three standard deviations of the image-plane residual at the given range:
// the larger of sigma_d and sigma_theta * d, plus the displacement caused by
// per-pose errors of pose_sigma_rot (rad) and pose_sigma_trans (m) in both views.
double point_gate_threshold(const NoiseModel& noise, double distance, double pose_sigma_rot = 0.0,
                            double pose_sigma_trans = 0.0);

// Three times the larger image-axis standard deviation: sigma_d radially and
// sigma_theta * d tangentially, evaluated at half the maximum range.
double default_gate_threshold(const NoiseModel& noise, const FovSpec& fov);

}  // namespace bestanp
