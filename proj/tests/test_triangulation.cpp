#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "bestanp/error.hpp"
#include "bestanp/triangulation.hpp"
#include "test_support.hpp"

using namespace bestanp;

namespace {

// View b orbits the target about the world z axis through it by `yaw`.
std::pair<Pose, Pose> orbit_pair(const Vec3& target, double yaw, double pitch = deg_to_rad(15)) {
  Pose a;
  a.rotation = so3_exp(Vec3(0, pitch, 0));
  a.translation = target - a.rotation * Vec3(3.0, 0, 0);
  const Mat3 rz = so3_exp(Vec3(0, 0, yaw));
  Pose b;
  b.rotation = rz * a.rotation;
  b.translation = target + rz * (a.translation - target);
  return {a, b};
}

TwoViewObservation observe_pair(const Pose& a, const Pose& b, const Vec3& p, const NoiseModel& noise,
                                RandomStream& s) {
  return {a, b, apply_noise(project_ideal(a, p).measurement, noise, s),
          apply_noise(project_ideal(b, p).measurement, noise, s)};
}

// Full four-residual ML by grid search and numeric Gauss-Newton.
Vec3 triangulation_oracle(const TwoViewObservation& obs, const Vec3& center, const NoiseModel& noise) {
  auto residuals = [&](const Vec3& p) {
    Eigen::Vector4d f;
    const Vec3 va = obs.pose_a.to_local(p);
    const Vec3 vb = obs.pose_b.to_local(p);
    f << (obs.meas_a.distance - va.norm()) / noise.sigma_d,
        (obs.meas_a.azimuth_tangent - va.y() / va.x()) / noise.sigma_theta,
        (obs.meas_b.distance - vb.norm()) / noise.sigma_d,
        (obs.meas_b.azimuth_tangent - vb.y() / vb.x()) / noise.sigma_theta;
    return f;
  };
  Vec3 best = center;
  double best_cost = residuals(best).squaredNorm();
  const int g = 10;
  const double half = 0.05;
  for (int i = -g; i <= g; ++i)
    for (int j = -g; j <= g; ++j)
      for (int k = -g; k <= g; ++k) {
        const Vec3 p = center + half / g * Vec3(i, j, k);
        const double c = residuals(p).squaredNorm();
        if (c < best_cost) {
          best_cost = c;
          best = p;
        }
      }
  for (int it = 0; it < 30; ++it) {
    Eigen::Matrix<double, 4, 3> j;
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-7;
      j.col(k) = (residuals(best + h * Vec3::Unit(k)) - residuals(best - h * Vec3::Unit(k))) / (2 * h);
    }
    const Vec3 step = -(j.transpose() * j).ldlt().solve(j.transpose() * residuals(best));
    best += step;
    if (step.norm() < 1e-14) break;
  }
  return best;
}

// Point seen by view a at 3 to 9 degrees of elevation.
Vec3 sample_point(const Pose& a, RandomStream& s) {
  const double sign = s.uniform(0, 1) < 0.5 ? -1.0 : 1.0;
  return a.to_world(cartesian_of({s.uniform(2, 4), deg_to_rad(s.uniform(-20, 20)),
                                  sign * deg_to_rad(s.uniform(3, 9))}));
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Triangulate, NoiseFreeThirtyDegreeYaw) {
  RandomStream s(61);
  for (int i = 0; i < 50; ++i) {
    const Vec3 target(s.normal(), s.normal(), s.normal());
    const auto [a, b] = orbit_pair(target, deg_to_rad(30));
    const Vec3 p = target + 0.3 * Vec3(s.normal(), s.normal(), 0.3 * s.normal());
    if (!in_fov(a, p, FovSpec{}) || !in_fov(b, p, FovSpec{})) continue;
    const TriangulatedPoint tp = triangulate_two_view(observe_pair(a, b, p, {0, 0}, s));
    EXPECT_LT((tp.point - p).norm(), 1e-9);
    EXPECT_LT(tp.residual_reprojection, 1e-9);
    EXPECT_LT(tp.residual_distance, 1e-9);
    EXPECT_GT(tp.dilution, 0.0);
  }
}

TEST(Triangulate, NoiseFreeReprojectsBothMeasurements) {
  RandomStream s(62);
  const auto [a, b] = orbit_pair(Vec3::Zero(), deg_to_rad(20));
  const Vec3 p(0.1, -0.2, 0.15);
  const TwoViewObservation obs = observe_pair(a, b, p, {0, 0}, s);
  const TriangulatedPoint tp = triangulate_two_view(obs);
  const Projection pa = project_ideal(a, tp.point);
  const Projection pb = project_ideal(b, tp.point);
  EXPECT_NEAR(pa.measurement.distance, obs.meas_a.distance, 1e-9);
  EXPECT_NEAR(pa.measurement.azimuth_tangent, obs.meas_a.azimuth_tangent, 1e-9);
  EXPECT_NEAR(pb.measurement.distance, obs.meas_b.distance, 1e-9);
  EXPECT_NEAR(pb.measurement.azimuth_tangent, obs.meas_b.azimuth_tangent, 1e-9);
}

TEST(Triangulate, ZeroElevationPointFromLevelViews) {
  RandomStream s(63);
  const auto [a, b] = orbit_pair(Vec3(1, 1, 0), deg_to_rad(30), 0.0);
  const Vec3 p(1.1, 0.9, 0.0);
  const TriangulatedPoint tp = triangulate_two_view(observe_pair(a, b, p, {0, 0}, s));
  EXPECT_NEAR(tp.point.z(), p.z(), 1e-9);
  EXPECT_LT((tp.point - p).norm(), 1e-9);
}

TEST(Triangulate, Errors) {
  RandomStream s(64);
  const auto [a, b] = orbit_pair(Vec3::Zero(), 0.0);
  const Vec3 p(0.05, 0.1, 0.0);
  try {
    triangulate_two_view(observe_pair(a, b, p, {0, 0}, s));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kBadParams || e.code() == ErrorCode::kParallelPlanes);
  }
  // pure translation along the planes' common direction: identical azimuth planes
  Pose c = a;
  c.translation += 0.2 * a.rotation.col(0);
  try {
    triangulate_two_view({a, c, SonarMeasurement::from_angle(3.0, 0.0), SonarMeasurement::from_angle(2.8, 0.0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParallelPlanes);
  }
}

TEST(Triangulate, NearFullMlOracle) {
  RandomStream s(65);
  const NoiseModel noise{1e-3, 1e-3};
  std::vector<double> err_tri, err_oracle;
  for (int i = 0; i < 300; ++i) {
    const Vec3 target(s.normal(), s.normal(), s.normal());
    const auto [a, b] = orbit_pair(target, deg_to_rad(s.uniform(15, 40)));
    const Vec3 p = sample_point(a, s);
    if (!in_fov(b, p, FovSpec{})) continue;
    const TwoViewObservation obs = observe_pair(a, b, p, noise, s);
    TriangulatedPoint tp;
    try {
      tp = triangulate_two_view(obs);
    } catch (const Error&) {
      continue;
    }
    if (tp.mirror_ambiguous) continue;
    const Vec3 oracle = triangulation_oracle(obs, p, noise);
    err_tri.push_back((tp.point - p).norm());
    err_oracle.push_back((oracle - p).norm());
  }
  ASSERT_GT(err_tri.size(), 100u);
  EXPECT_LT(median(err_tri), 3 * median(err_oracle));
}

TEST(Triangulate, ErrorShrinksWithBaseline) {
  const NoiseModel noise{1e-3, 1e-3};
  double previous = 1e9;
  for (double yaw : {5.0, 15.0, 25.0, 35.0, 45.0}) {
    RandomStream s(66);
    std::vector<double> errs;
    for (int i = 0; i < 500; ++i) {
      const Vec3 target(s.normal(), s.normal(), s.normal());
      const auto [a, b] = orbit_pair(target, deg_to_rad(yaw));
      const Vec3 p = sample_point(a, s);
      try {
        errs.push_back((triangulate_two_view(observe_pair(a, b, p, noise, s)).point - p).norm());
      } catch (const Error&) {
      }
    }
    ASSERT_GT(errs.size(), 400u);
    const double m = median(errs);
    EXPECT_LT(m, previous) << "yaw " << yaw;
    previous = m;
  }
}

TEST(Gate, Basics) {
  TriangulatedPoint p;
  p.residual_reprojection = 0.0;
  EXPECT_TRUE(gate_point(p, 1e-6));
  p.residual_reprojection = 5e-3;
  EXPECT_FALSE(gate_point(p, 3e-3));
  const NoiseModel noise{1e-3, 1e-3};
  EXPECT_DOUBLE_EQ(point_gate_threshold(noise, 2.0), 6e-3);
  EXPECT_DOUBLE_EQ(point_gate_threshold(noise, 0.5), 3e-3);
  EXPECT_DOUBLE_EQ(default_gate_threshold(noise, FovSpec{}), 9e-3);
  EXPECT_DOUBLE_EQ(point_gate_threshold({0, 0}, 3.0), kMinGateThreshold);
  EXPECT_GT(point_gate_threshold(noise, 3.0, 1e-2, 1e-2), point_gate_threshold(noise, 3.0));
}

// Labelled corruption: 10 sigma azimuth error on view b.
TEST(Gate, SeparatesCorruptedPoints) {
  RandomStream s(67);
  const NoiseModel noise{1e-3, 1e-3};
  int inliers = 0, inliers_pass = 0, outliers = 0, outliers_pass = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 target(s.normal(), s.normal(), s.normal());
    const auto [a, b] = orbit_pair(target, deg_to_rad(s.uniform(15, 40)));
    const Vec3 p = sample_point(a, s);
    if (!in_fov(b, p, FovSpec{})) continue;
    TwoViewObservation obs = observe_pair(a, b, p, noise, s);
    const bool corrupt = i % 2 == 1;
    if (corrupt) {
      const double sign = s.uniform(0, 1) < 0.5 ? -1.0 : 1.0;
      const double th = obs.meas_b.azimuth() + sign * 10 * noise.sigma_theta;
      obs.meas_b = SonarMeasurement::from_angle(obs.meas_b.distance, th);
    }
    TriangulatedPoint tp;
    try {
      tp = triangulate_two_view(obs);
    } catch (const Error&) {
      continue;
    }
    const double gate = point_gate_threshold(noise, std::max(obs.meas_a.distance, obs.meas_b.distance));
    const bool pass = !tp.mirror_ambiguous && gate_point(tp, gate);
    if (corrupt) {
      ++outliers;
      outliers_pass += pass;
    } else {
      ++inliers;
      inliers_pass += pass;
    }
  }
  ASSERT_GT(inliers, 500);
  EXPECT_GE(inliers_pass, 0.95 * inliers);
  EXPECT_LT(double(outliers_pass) / outliers, 0.9 * double(inliers_pass) / inliers);
}
