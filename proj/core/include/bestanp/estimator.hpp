#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "bestanp/geometry.hpp"
#include "bestanp/sonar_model.hpp"

namespace bestanp {

// Known world points paired with their sonar measurements.
struct CorrespondenceSet {
  std::vector<Vec3> world_points;
  std::vector<SonarMeasurement> measurements;

  std::size_t size() const { return world_points.size(); }

  // Equal lengths, finite values, positive distances. Throws kLengthMismatch
  // or kBadParams.
  void validate() const;
};

inline constexpr std::size_t kMinPointsTranslation = 4;
inline constexpr std::size_t kMinPointsFullPose = 6;
inline constexpr double kCoplanarityThreshold = 1e-6;
inline constexpr double kVarianceFloor = 1e-12;

struct TranslationEstimate {
  Vec3 t_hat = Vec3::Zero();
  // x4 - |t|^2 from the bias-eliminated least squares, clamped at zero.
  double sigma_d_sq_hat = 0.0;
  // Condition number (largest / smallest singular value) of the n x 4 design.
  double design_matrix_condition = 0.0;
};

struct RotationEstimate {
  Vec6 r_hat = Vec6::Zero();  // stacked first two rows of R^T, |r_hat|^2 = 2
  Mat3 r_be = Mat3::Identity();
  double sigma_theta_sq_hat = 0.0;
  double smallest_eigenvalue = 0.0;
  double eigengap = 0.0;
  int sign_votes_agree = 0;
  int sign_votes_disagree = 0;
};

// How the sign of the eigenvector is fixed: by majority vote over all points,
// or from the first point only.
enum class SignRule { kMajority, kFirstPoint };

// Range-noise variance used to whiten the Gauss-Newton system.
//   kResidual:       mean squared range residual at t_hat, divided by n - 3.
//   kBiasEliminated: sigma_d_sq_hat of the translation estimate.
enum class RangeVarianceSource { kResidual, kBiasEliminated };

struct EstimatorOptions {
  int gn_iterations = 1;
  bool bias_correction = true;  // false forces the correction matrix C to zero
  SignRule sign_rule = SignRule::kMajority;
  RangeVarianceSource gn_range_variance = RangeVarianceSource::kResidual;
};

// Whitened residual and Jacobian of the ML problem, linearized on the
// right-multiplied rotation chart R exp(s^). Rows alternate distance and
// azimuth for each point; columns are (s, t).
struct GnWorkspace {
  Eigen::VectorXd residual;
  Eigen::Matrix<double, Eigen::Dynamic, 6> jacobian;
  Vec6 step = Vec6::Zero();
};

struct EstimateReport {
  TranslationEstimate t_be;
  RotationEstimate r_be;
  Pose pose_be;
  Pose pose_gn;
  double sigma_d_used = 0.0;
  double sigma_theta_used = 0.0;
  double ml_cost_initial = 0.0;
  double ml_cost_final = 0.0;
  int gn_iterations = 0;
  bool gn_cost_decreased = true;
};

struct CrlbMatrix {
  Mat6 cov_bound = Mat6::Zero();  // (rotation tangent, translation)

  double rotation_root_trace() const;
  double translation_root_trace() const;
};

// Range-only step: solves min |A x - b|^2 with rows (-2 p_i^T, 1) and
// b_i = d_i^2 - |p_i|^2. Throws kTooFewPoints (n < 4) or kCoplanarPoints.
TranslationEstimate estimate_translation(const CorrespondenceSet& corr);

// Azimuth noise variance 1 / lambda_max(Q^-1 S), clamped at zero.
double estimate_sigma_theta(const CorrespondenceSet& corr, const Vec3& t_hat);

RotationEstimate estimate_rotation(const CorrespondenceSet& corr, const Vec3& t_hat,
                                   double sigma_theta_sq, SignRule rule = SignRule::kMajority);

void linearize(const CorrespondenceSet& corr, const Pose& pose, double sigma_d,
               double sigma_theta, GnWorkspace& ws);

struct GnResult {
  Pose pose;
  GnWorkspace workspace;  // linearization of the last iteration
};

GnResult gn_refine(const CorrespondenceSet& corr, const Pose& pose0, double sigma_d,
                   double sigma_theta, int iterations = 1);

// Full pipeline: translation, Q^BE, eigenvector, sign fix, cross product,
// SO(3) projection, Gauss-Newton. Errors carry the failing stage.
EstimateReport bestanp(const CorrespondenceSet& corr, const EstimatorOptions& options = {});

// (1/n) sum(f_d^2 / sigma_d^2 + f_theta^2 / sigma_theta^2).
double ml_cost(const CorrespondenceSet& corr, const Pose& pose, double sigma_d,
               double sigma_theta);

// Inverse Fisher information of the measurement model at the true pose.
CrlbMatrix compute_crlb(std::span<const Vec3> world_points, const Pose& true_pose,
                        double sigma_d, double sigma_theta);

// Smallest over largest singular value of the n x 4 matrix [p_i^T 1].
double coplanarity_ratio(std::span<const Vec3> world_points);

}  // namespace bestanp
