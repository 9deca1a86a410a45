#include "bestanp/triangulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/toms748_solve.hpp>

#include "bestanp/error.hpp"

namespace bestanp {
namespace {

// r_2 - tan(theta) r_1 with r_k the k-th column of R; unit length.
Vec3 azimuth_plane_normal(const Pose& pose, const SonarMeasurement& m) {
  return (pose.rotation.col(1) - m.azimuth_tangent * pose.rotation.col(0)).normalized();
}

// Range residuals along the line origin + lambda direction. A sphere centre is
// kept as its offset q along the line and squared distance h2 from it;
// d - |p - c| = (d^2 - h2 - (q + lambda)^2) / (d + |p - c|).
class LineObjective {
 public:
  LineObjective(const Vec3& origin, const Vec3& direction, const Vec3& center_a,
                const Vec3& center_b, double d_a, double d_b)
      : origin_(origin), direction_(direction),
        spheres_{sphere(center_a, d_a), sphere(center_b, d_b)} {}

  Vec3 at(double lambda) const { return origin_ + lambda * direction_; }

  double value(double lambda) const {
    double v = 0.0;
    for (const Sphere& s : spheres_) {
      const double r = residual(s, lambda);
      v += r * r;
    }
    return v;
  }

  // Half the derivative of value() with respect to lambda.
  double slope(double lambda) const {
    double v = 0.0;
    for (const Sphere& s : spheres_) {
      const double u = s.q + lambda;
      const double dist = std::sqrt(s.h2 + u * u);
      if (dist > 0.0) v -= residual(s, lambda) * u / dist;
    }
    return v;
  }

  double max_range() const { return std::max(spheres_[0].d, spheres_[1].d); }

 private:
  struct Sphere {
    double q;
    double h2;
    double d;
    double d2_minus_h2;
  };

  Sphere sphere(const Vec3& c, double d) const {
    const Vec3 w = origin_ - c;
    const double q = direction_.dot(w);
    const double h2 = (w - q * direction_).squaredNorm();
    const double h = std::sqrt(h2);
    return {q, h2, d, (d - h) * (d + h)};
  }

  static double residual(const Sphere& s, double lambda) {
    const double u = s.q + lambda;
    return (s.d2_minus_h2 - u * u) / (s.d + std::sqrt(s.h2 + u * u));
  }

  Vec3 origin_;
  Vec3 direction_;
  std::array<Sphere, 2> spheres_;
};

// Rows of the image-plane Jacobian (radial, tangential) of one view with
// respect to the world point.
Eigen::Matrix<double, 2, 3> image_jacobian(const Pose& pose, const Vec3& p) {
  const Vec3 q = pose.to_local(p);
  const double d = q.norm();
  const double rho_sq = q.x() * q.x() + q.y() * q.y();
  Eigen::Matrix<double, 2, 3> j;
  j.row(0) = q.transpose() / d;
  j.row(1) = Eigen::RowVector3d(-q.y(), q.x(), 0.0) * (d / rho_sq);
  return j * pose.rotation.transpose();
}

std::vector<double> local_minima(const LineObjective& f, double half_width) {
  constexpr int kHalfSamples = 400;
  std::vector<double> minima;
  const double step = half_width / kHalfSamples;
  double prev_x = -half_width;
  double prev_s = f.slope(prev_x);
  for (int k = -kHalfSamples + 1; k <= kHalfSamples; ++k) {
    const double x = k * step;
    const double s = f.slope(x);
    if (s == 0.0) {
      minima.push_back(x);
    } else if (prev_s < 0.0 && s > 0.0) {
      std::uintmax_t max_iter = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(
          [&f](double lambda) { return f.slope(lambda); }, prev_x, x, prev_s, s,
          boost::math::tools::eps_tolerance<double>(), max_iter);
      minima.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_s = s;
  }
  return minima;
}

}  // namespace

TriangulatedPoint triangulate_two_view(const TwoViewObservation& obs) {
  const Vec3& ta = obs.pose_a.translation;
  const Vec3& tb = obs.pose_b.translation;
  if ((ta - tb).norm() <= kMinBaseline) {
    throw Error(ErrorCode::kBadParams, "two-view triangulation needs a baseline above 1e-6 m");
  }
  const Vec3 na = azimuth_plane_normal(obs.pose_a, obs.meas_a);
  const Vec3 nb = azimuth_plane_normal(obs.pose_b, obs.meas_b);
  const Vec3 cross = na.cross(nb);
  if (std::asin(std::min(1.0, cross.norm())) < kMinPlaneAngle) {
    throw Error(ErrorCode::kParallelPlanes, "azimuth planes of the two views are parallel");
  }

  // Point of the intersection line closest to t_a.
  const Vec3 foot = ta + (nb.dot(tb - ta) / cross.squaredNorm()) * cross.cross(na);
  const LineObjective f(foot, cross.normalized(), ta, tb,
                        obs.meas_a.distance, obs.meas_b.distance);

  const double half_width = 2.0 * f.max_range();
  struct Candidate {
    Vec3 point;
    double cost;
  };
  std::vector<Candidate> admissible;
  for (const double lambda : local_minima(f, half_width)) {
    const Vec3 p = f.at(lambda);
    const double xa = obs.pose_a.to_local(p).x();
    const double xb = obs.pose_b.to_local(p).x();
    if (xa * obs.meas_a.cos_sign > 0.0 && xb * obs.meas_b.cos_sign > 0.0) {
      admissible.push_back({p, f.value(lambda)});
    }
  }
  if (admissible.empty()) {
    throw Error(ErrorCode::kNoForwardSolution,
                "no range minimizer lies in front of both sonars");
  }
  std::sort(admissible.begin(), admissible.end(),
            [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });

  TriangulatedPoint out;
  out.point = admissible.front().point;
  out.residual_distance = std::sqrt(0.5 * admissible.front().cost);
  if (admissible.size() > 1) {
    const double gap = std::sqrt(0.5 * admissible[1].cost) - out.residual_distance;
    out.mirror_ambiguous = gap < kMirrorTieTolerance &&
                           (admissible[1].point - out.point).norm() > kMirrorTieTolerance;
  }
  const double ea = reprojection_error(obs.pose_a, out.point, obs.meas_a.image_point());
  const double eb = reprojection_error(obs.pose_b, out.point, obs.meas_b.image_point());
  out.residual_reprojection = std::sqrt(0.5 * (ea * ea + eb * eb));

  Eigen::Matrix<double, 4, 3> j;
  j.topRows<2>() = image_jacobian(obs.pose_a, out.point);
  j.bottomRows<2>() = image_jacobian(obs.pose_b, out.point);
  const double lambda_min =
      Eigen::SelfAdjointEigenSolver<Mat3>(j.transpose() * j, Eigen::EigenvaluesOnly)
          .eigenvalues()(0);
  out.dilution = lambda_min > 0.0 ? 1.0 / std::sqrt(lambda_min)
                                  : std::numeric_limits<double>::infinity();
  return out;
}

bool gate_point(const TriangulatedPoint& p, double threshold) {
  return p.residual_reprojection <= threshold;
}

double point_gate_threshold(const NoiseModel& noise, double distance, double pose_sigma_rot,
                            double pose_sigma_trans) {
  const double meas = std::max(noise.sigma_d, noise.sigma_theta * distance);
  const double rot = pose_sigma_rot * distance;
  // two poses contribute to the relative-pose error
  const double sigma = std::sqrt(meas * meas + 2.0 * (rot * rot + pose_sigma_trans * pose_sigma_trans));
  return std::max(3.0 * sigma, kMinGateThreshold);
}

double default_gate_threshold(const NoiseModel& noise, const FovSpec& fov) {
  return point_gate_threshold(noise, 0.5 * fov.max_distance);
}

}  // namespace bestanp
