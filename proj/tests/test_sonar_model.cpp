#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bestanp/error.hpp"
#include "bestanp/sonar_model.hpp"
#include "test_support.hpp"

using namespace bestanp;

TEST(ToSonarFrame, Basics) {
  EXPECT_EQ(to_sonar_frame(Pose{}, Vec3(1, 2, 3)), Vec3(1, 2, 3));
  Pose p;
  p.translation = Vec3(1, 0, 0);
  EXPECT_LT(to_sonar_frame(p, Vec3(1, 0, 0)).norm(), 1e-15);
}

TEST(ToSonarFrame, InverseOfForwardTransform) {
  RandomStream s(21);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = bestanp::testing::random_pose(s, 3.0);
    const Vec3 q(s.normal(), s.normal(), s.normal());
    EXPECT_LT((to_sonar_frame(pose, pose.rotation * q + pose.translation) - q).norm(), 1e-12);
  }
}

TEST(Spherical, SimpleValues) {
  const SphericalCoords a = spherical_of(Vec3(1, 0, 0));
  EXPECT_DOUBLE_EQ(a.distance, 1.0);
  EXPECT_DOUBLE_EQ(a.azimuth, 0.0);
  EXPECT_DOUBLE_EQ(a.elevation, 0.0);
  const SphericalCoords b = spherical_of(Vec3(0.5, 0.5, 0));
  EXPECT_NEAR(b.distance, std::sqrt(2.0) / 2, 1e-15);
  EXPECT_NEAR(b.azimuth, std::numbers::pi / 4, 1e-15);
  EXPECT_NEAR(b.elevation, 0.0, 1e-15);
}

TEST(Spherical, SingularAzimuthThrows) {
  try {
    spherical_of(Vec3(1e-13, 1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAzimuthSingular);
  }
}

// Oracle: d (cos phi cos theta, cos phi sin theta, sin phi).
TEST(Spherical, CartesianRoundTrip) {
  RandomStream s(22);
  const FovSpec fov;
  for (int i = 0; i < 1000; ++i) {
    const double d = s.uniform(0.5, fov.max_distance);
    const double th = s.uniform(-fov.azimuth_halfwidth, fov.azimuth_halfwidth);
    const double ph = s.uniform(-fov.elevation_halfwidth, fov.elevation_halfwidth);
    const Vec3 q(d * std::cos(ph) * std::cos(th), d * std::cos(ph) * std::sin(th), d * std::sin(ph));
    const SphericalCoords c = spherical_of(q);
    EXPECT_NEAR(c.distance, d, 1e-12);
    EXPECT_NEAR(c.azimuth, th, 1e-12);
    EXPECT_NEAR(c.elevation, ph, 1e-12);
    EXPECT_LT((cartesian_of(c) - q).norm(), 1e-12);
  }
}

TEST(ProjectIdeal, SimpleValues) {
  const Projection a = project_ideal(Pose{}, Vec3(2, 0, 0));
  EXPECT_DOUBLE_EQ(a.measurement.distance, 2.0);
  EXPECT_DOUBLE_EQ(a.measurement.azimuth_tangent, 0.0);
  EXPECT_DOUBLE_EQ(a.image.x, 2.0);
  EXPECT_DOUBLE_EQ(a.image.y, 0.0);
  const Projection b = project_ideal(Pose{}, Vec3(1, 1, 0));
  EXPECT_NEAR(b.measurement.distance, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(b.measurement.azimuth_tangent, 1.0, 1e-15);
  EXPECT_NEAR(b.image.x, 1.0, 1e-15);
  EXPECT_NEAR(b.image.y, 1.0, 1e-15);
}

TEST(ProjectIdeal, MatchesDirectEvaluation) {
  RandomStream s(23);
  for (int i = 0; i < 200; ++i) {
    const Pose pose = bestanp::testing::random_pose(s);
    const Vec3 p = pose.translation + pose.rotation * Vec3(s.uniform(0.5, 5), s.normal(), s.normal());
    const Projection pr = project_ideal(pose, p);
    const Vec3 u = p - pose.translation;
    const double x = pose.rotation.col(0).dot(u);
    const double y = pose.rotation.col(1).dot(u);
    EXPECT_NEAR(pr.measurement.distance, u.norm(), 1e-12);
    EXPECT_NEAR(pr.measurement.azimuth_tangent, y / x, 1e-12);
    const double th = std::atan2(y, x);
    EXPECT_NEAR(pr.image.x, u.norm() * std::cos(th), 1e-12);
    EXPECT_NEAR(pr.image.y, u.norm() * std::sin(th), 1e-12);
  }
}

TEST(Measurement, AngleRoundTripKeepsQuadrant) {
  for (double th : {-2.5, -0.3, 0.0, 0.7, 2.9}) {
    const SonarMeasurement m = SonarMeasurement::from_angle(3.0, th);
    EXPECT_NEAR(m.azimuth(), th, 1e-14);
    EXPECT_EQ(m.cos_sign, std::cos(th) >= 0 ? 1 : -1);
  }
}

TEST(InFov, Cases) {
  const FovSpec fov;
  EXPECT_TRUE(in_fov(Pose{}, Vec3(1, 0, 0), fov));
  EXPECT_FALSE(in_fov(Pose{}, Vec3(7, 0, 0), fov));
  EXPECT_FALSE(in_fov(Pose{}, Vec3(0, 1, 0), fov));
  // boundary azimuth counts as inside; nudge inward by an ulp-scale amount
  const double th = fov.azimuth_halfwidth * (1 - 1e-15);
  EXPECT_TRUE(in_fov(Pose{}, Vec3(std::cos(th), std::sin(th), 0), fov));
  EXPECT_FALSE(in_fov(Pose{}, Vec3(std::cos(th + 1e-9), std::sin(th + 1e-9), 0), fov));
  EXPECT_FALSE(in_fov(Pose{}, Vec3(1, 0, std::tan(fov.elevation_halfwidth + 1e-6)), fov));
}

TEST(FovSpec, Validation) {
  FovSpec fov;
  fov.azimuth_halfwidth = std::numbers::pi / 2;
  EXPECT_THROW(fov.validate(), Error);
  fov = FovSpec{};
  fov.max_distance = 0;
  EXPECT_THROW(fov.validate(), Error);
}

TEST(ApplyNoise, ZeroSigmaIsIdentity) {
  RandomStream s(24);
  const SonarMeasurement m = SonarMeasurement::from_angle(2.5, 0.2);
  for (NoiseMechanism mech : {NoiseMechanism::kOnTangent, NoiseMechanism::kOnAngle}) {
    const SonarMeasurement out = apply_noise(m, {0.0, 0.0, mech, 0}, s);
    EXPECT_DOUBLE_EQ(out.distance, m.distance);
    EXPECT_NEAR(out.azimuth_tangent, m.azimuth_tangent, 1e-15);
    EXPECT_EQ(out.cos_sign, m.cos_sign);
  }
}

TEST(ApplyNoise, DistanceMeanLawOfLargeNumbers) {
  RandomStream s(25);
  const SonarMeasurement m = SonarMeasurement::from_angle(3.0, 0.1);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += apply_noise(m, {1e-3, 0.0}, s).distance;
  EXPECT_LT(std::abs(sum / n - 3.0), 3 * 1e-3 / std::sqrt(double(n)));
}

TEST(ApplyNoise, DeterministicForStreamState) {
  const SonarMeasurement m = SonarMeasurement::from_angle(3.0, 0.1);
  RandomStream a(26), b(26);
  for (int i = 0; i < 10; ++i) {
    const SonarMeasurement x = apply_noise(m, {1e-2, 1e-2}, a);
    const SonarMeasurement y = apply_noise(m, {1e-2, 1e-2}, b);
    EXPECT_EQ(x.distance, y.distance);
    EXPECT_EQ(x.azimuth_tangent, y.azimuth_tangent);
  }
}

TEST(ApplyNoise, MechanismsAgreeToFirstOrderAtZeroAzimuth) {
  const SonarMeasurement m = SonarMeasurement::from_angle(3.0, 0.0);
  RandomStream a(27), b(27);
  for (int i = 0; i < 1000; ++i) {
    const SonarMeasurement t = apply_noise(m, {1e-3, 1e-3, NoiseMechanism::kOnTangent, 0}, a);
    const SonarMeasurement g = apply_noise(m, {1e-3, 1e-3, NoiseMechanism::kOnAngle, 0}, b);
    EXPECT_EQ(t.distance, g.distance);
    EXPECT_NEAR(t.azimuth_tangent, g.azimuth_tangent, 1e-6);
  }
}

// E[tan(theta + e)] - E[tan(theta) + e] ~ sec^2 tan sigma^2, bounded by 3 sigma^2 sec^2 tan.
TEST(ApplyNoise, MechanismDiscrepancyBoundMonteCarlo) {
  for (double th : {0.2, std::numbers::pi / 6}) {
    const double sig = 1e-2;
    const SonarMeasurement m = SonarMeasurement::from_angle(3.0, th);
    RandomStream a(28), b(28);
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = apply_noise(m, {0.0, sig, NoiseMechanism::kOnTangent, 0}, a).azimuth_tangent;
      const double g = apply_noise(m, {0.0, sig, NoiseMechanism::kOnAngle, 0}, b).azimuth_tangent;
      sum += g - t;
    }
    const double sec2 = 1.0 / (std::cos(th) * std::cos(th));
    const double bound = 3 * sig * sig * sec2 * std::tan(th);
    EXPECT_LE(std::abs(sum / n), 2 * bound) << th;
    EXPECT_GT(sum / n, 0.0);
  }
}

TEST(ReprojectionError, Cases) {
  EXPECT_NEAR(reprojection_error(Pose{}, Vec3(2, 0, 0), {2, 0.1}), 0.1, 1e-15);
  RandomStream s(29);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = bestanp::testing::random_pose(s);
    const Vec3 p = pose.to_world(Vec3(s.uniform(0.5, 5), s.normal(0.5), s.normal(0.2)));
    const ImagePoint ideal = project_ideal(pose, p).image;
    EXPECT_LT(reprojection_error(pose, p, ideal), 1e-12);
    const ImagePoint off{ideal.x + 0.03, ideal.y - 0.04};
    EXPECT_NEAR(reprojection_error(pose, p, off), 0.05, 1e-12);
  }
}
