#include "bestanp/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "bestanp/error.hpp"

namespace bestanp {

Mat3 hat(const Vec3& s) {
  Mat3 m;
  m << 0.0, -s.z(), s.y(),
       s.z(), 0.0, -s.x(),
       -s.y(), s.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 so3_exp(const Vec3& s) {
  const double theta_sq = s.squaredNorm();
  const double theta = std::sqrt(theta_sq);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-8) {
    a = 1.0 - theta_sq / 6.0;
    b = 0.5 - theta_sq / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta_sq;
  }
  const Mat3 k = hat(s);
  return Mat3::Identity() + a * k + b * (k * k);
}

Vec3 so3_log(const Mat3& rotation) {
  const double trace = rotation.trace();
  if (trace <= -1.0 + 1e-9) {
    throw Error(ErrorCode::kAngleAtPi, "so3_log: rotation angle is within 1e-9 of pi");
  }
  const Vec3 w = 0.5 * vee(rotation - rotation.transpose());  // sin(theta) * axis
  const double sin_theta = w.norm();
  const double cos_theta = 0.5 * (trace - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta < 1e-8) {
    return (1.0 + theta * theta / 6.0) * w;
  }
  return (theta / sin_theta) * w;
}

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) <= 1e-12) {
    throw Error(ErrorCode::kRankDeficient, "project_to_so3: matrix is rank deficient");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

double geodesic_error(const Mat3& ra, const Mat3& rb) {
  return so3_log(ra.transpose() * rb).norm();
}

bool is_rotation(const Mat3& m, double tolerance) {
  return (m.transpose() * m - Mat3::Identity()).norm() <= tolerance &&
         std::abs(m.determinant() - 1.0) <= tolerance;
}

}  // namespace bestanp
