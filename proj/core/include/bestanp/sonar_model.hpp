#pragma once

#include <cstdint>

#include "bestanp/geometry.hpp"
#include "bestanp/random.hpp"

namespace bestanp {

struct SphericalCoords {
  double distance = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

// Point on the zero-elevation sonar image plane, meters.
struct ImagePoint {
  double x = 0.0;
  double y = 0.0;
};

// Distance plus azimuth stored as its tangent. The tangent loses the sign of
// cos(theta), which the rotation sign fix needs, so it is carried alongside.
struct SonarMeasurement {
  double distance = 0.0;
  double azimuth_tangent = 0.0;
  int cos_sign = 1;

  static SonarMeasurement from_angle(double distance, double azimuth);

  double azimuth() const;
  ImagePoint image_point() const;
};

struct FovSpec {
  double max_distance = 6.0;
  double azimuth_halfwidth = deg_to_rad(30.0);
  double elevation_halfwidth = deg_to_rad(10.0);

  // Throws kBadParams unless all extents are positive and the azimuth
  // half-width is below pi/2.
  void validate() const;
};

enum class NoiseMechanism { kOnTangent, kOnAngle };

struct NoiseModel {
  double sigma_d = 0.0;
  double sigma_theta = 0.0;
  NoiseMechanism mechanism = NoiseMechanism::kOnTangent;
  std::uint64_t seed = 0;
};

inline constexpr double kAzimuthSingularity = 1e-12;

Vec3 to_sonar_frame(const Pose& pose, const Vec3& world_point);

// Throws kAzimuthSingular when |x| <= 1e-12.
SphericalCoords spherical_of(const Vec3& sonar_point);
Vec3 cartesian_of(const SphericalCoords& coords);

struct Projection {
  SonarMeasurement measurement;
  ImagePoint image;
};

// Noise-free measurement and image point of a world point.
Projection project_ideal(const Pose& pose, const Vec3& world_point);

// Closed intervals on every axis; singular azimuth counts as outside.
bool in_fov(const Pose& pose, const Vec3& world_point, const FovSpec& fov);

// Draws the distance noise first, then the azimuth noise, so both mechanisms
// consume the stream identically.
SonarMeasurement apply_noise(const SonarMeasurement& ideal, const NoiseModel& model,
                             RandomStream& stream);

double reprojection_error(const Pose& pose, const Vec3& world_point, const ImagePoint& observed);

}  // namespace bestanp
