#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace bestanp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Rigid transform taking sonar-frame coordinates to world coordinates:
// p_world = rotation * p_sonar + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return {}; }

  Vec3 to_local(const Vec3& world_point) const {
    return rotation.transpose() * (world_point - translation);
  }
  Vec3 to_world(const Vec3& local_point) const {
    return rotation * local_point + translation;
  }
  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

Mat3 hat(const Vec3& s);
Vec3 vee(const Mat3& m);

// Rodrigues formula; second-order Taylor coefficients below |s| = 1e-8.
Mat3 so3_exp(const Vec3& s);

// Inverse of so3_exp on the open ball |s| < pi. Throws kAngleAtPi when
// trace(R) <= -1 + 1e-9.
Vec3 so3_log(const Mat3& rotation);

// Frobenius-nearest rotation: U diag(1, 1, det(U V^T)) V^T. Throws
// kRankDeficient when the smallest singular value is <= 1e-12.
Mat3 project_to_so3(const Mat3& m);

// |so3_log(Ra^T Rb)| in radians.
double geodesic_error(const Mat3& ra, const Mat3& rb);

bool is_rotation(const Mat3& m, double tolerance = 1e-9);

constexpr double deg_to_rad(double degrees) { return degrees * 0.017453292519943295; }
constexpr double rad_to_deg(double radians) { return radians * 57.29577951308232; }

}  // namespace bestanp
