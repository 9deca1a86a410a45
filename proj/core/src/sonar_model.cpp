#include "bestanp/sonar_model.hpp"

#include <cmath>
#include <numbers>

#include "bestanp/error.hpp"

namespace bestanp {

SonarMeasurement SonarMeasurement::from_angle(double distance, double azimuth) {
  return {distance, std::tan(azimuth), std::cos(azimuth) < 0.0 ? -1 : 1};
}

double SonarMeasurement::azimuth() const {
  const double theta = std::atan(azimuth_tangent);
  if (cos_sign >= 0) return theta;
  return theta > 0.0 ? theta - std::numbers::pi : theta + std::numbers::pi;
}

ImagePoint SonarMeasurement::image_point() const {
  // d * (cos(theta), sin(theta)) without going through the angle.
  const double c = cos_sign / std::sqrt(1.0 + azimuth_tangent * azimuth_tangent);
  return {distance * c, distance * c * azimuth_tangent};
}

void FovSpec::validate() const {
  if (!(max_distance > 0.0) || !(azimuth_halfwidth > 0.0) || !(elevation_halfwidth > 0.0) ||
      !(azimuth_halfwidth < std::numbers::pi / 2)) {
    throw Error(ErrorCode::kBadParams,
                "field of view needs positive extents and azimuth half-width below pi/2");
  }
}

Vec3 to_sonar_frame(const Pose& pose, const Vec3& world_point) {
  return pose.to_local(world_point);
}

SphericalCoords spherical_of(const Vec3& p) {
  if (std::abs(p.x()) <= kAzimuthSingularity) {
    throw Error(ErrorCode::kAzimuthSingular, "azimuth undefined: point has x = 0 in the sonar frame");
  }
  const double d = p.norm();
  return {d, std::atan2(p.y(), p.x()), std::atan2(p.z(), std::hypot(p.x(), p.y()))};
}

Vec3 cartesian_of(const SphericalCoords& c) {
  const double ce = std::cos(c.elevation);
  return {c.distance * ce * std::cos(c.azimuth), c.distance * ce * std::sin(c.azimuth),
          c.distance * std::sin(c.elevation)};
}

Projection project_ideal(const Pose& pose, const Vec3& world_point) {
  const Vec3 u = world_point - pose.translation;
  const Vec3 p = pose.rotation.transpose() * u;
  if (std::abs(p.x()) <= kAzimuthSingularity) {
    throw Error(ErrorCode::kAzimuthSingular, "azimuth undefined: point has x = 0 in the sonar frame");
  }
  const double d = u.norm();
  SonarMeasurement m{d, p.y() / p.x(), p.x() < 0.0 ? -1 : 1};
  const double planar = std::hypot(p.x(), p.y());
  return {m, {d * p.x() / planar, d * p.y() / planar}};
}

bool in_fov(const Pose& pose, const Vec3& world_point, const FovSpec& fov) {
  const Vec3 p = pose.to_local(world_point);
  if (std::abs(p.x()) <= kAzimuthSingularity) return false;
  const SphericalCoords c = spherical_of(p);
  return c.distance <= fov.max_distance && std::abs(c.azimuth) <= fov.azimuth_halfwidth &&
         std::abs(c.elevation) <= fov.elevation_halfwidth;
}

SonarMeasurement apply_noise(const SonarMeasurement& ideal, const NoiseModel& model,
                             RandomStream& stream) {
  const double eps_d = stream.normal(model.sigma_d);
  const double eps_theta = stream.normal(model.sigma_theta);

  SonarMeasurement out = ideal;
  out.distance += eps_d;
  if (model.sigma_theta == 0.0) return out;

  switch (model.mechanism) {
    case NoiseMechanism::kOnTangent:
      out.azimuth_tangent += eps_theta;
      break;
    case NoiseMechanism::kOnAngle: {
      const double theta = ideal.azimuth() + eps_theta;
      out.azimuth_tangent = std::tan(theta);
      out.cos_sign = std::cos(theta) < 0.0 ? -1 : 1;
      break;
    }
  }
  return out;
}

double reprojection_error(const Pose& pose, const Vec3& world_point, const ImagePoint& observed) {
  const ImagePoint predicted = project_ideal(pose, world_point).image;
  return std::hypot(predicted.x - observed.x, predicted.y - observed.y);
}

}  // namespace bestanp
