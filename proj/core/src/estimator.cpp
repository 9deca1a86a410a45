#include "bestanp/estimator.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bestanp/error.hpp"

namespace bestanp {
namespace {

// Q = B^T B / n and the upper-left block of S, (1/n) sum (p_i - t)(p_i - t)^T.
// Q's lower-right block equals that same spread matrix.
struct AzimuthSystem {
  Mat6 q = Mat6::Zero();
  Mat3 spread = Mat3::Zero();
};

AzimuthSystem build_azimuth_system(const CorrespondenceSet& corr, const Vec3& t_hat) {
  AzimuthSystem sys;
  Mat3 w_tan2 = Mat3::Zero();
  Mat3 w_tan = Mat3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 u = corr.world_points[i] - t_hat;
    const double tan_theta = corr.measurements[i].azimuth_tangent;
    const Mat3 w = u * u.transpose();
    w_tan2 += (tan_theta * tan_theta) * w;
    w_tan += tan_theta * w;
    sys.spread += w;
  }
  const double inv_n = 1.0 / static_cast<double>(corr.size());
  w_tan2 *= inv_n;
  w_tan *= inv_n;
  sys.spread *= inv_n;
  sys.q.topLeftCorner<3, 3>() = w_tan2;
  sys.q.topRightCorner<3, 3>() = -w_tan;
  sys.q.bottomLeftCorner<3, 3>() = -w_tan;
  sys.q.bottomRightCorner<3, 3>() = sys.spread;
  return sys;
}

Mat6 correction_matrix(const Mat3& spread, double sigma_theta_sq) {
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>() = sigma_theta_sq * spread;
  return c;
}

void check_sizes(const CorrespondenceSet& corr, std::size_t min_points, const char* what) {
  if (corr.size() < min_points) {
    throw Error(ErrorCode::kTooFewPoints,
                std::string(what) + " requires n >= " + std::to_string(min_points) +
                    " correspondences (got " + std::to_string(corr.size()) + ")");
  }
}

// Residual rows of one point. `pose` is (R, t); returns (f_d, f_theta) unwhitened.
struct PointResidual {
  double f_d;
  double f_theta;
};

PointResidual point_residual(const Vec3& p, const SonarMeasurement& m, const Pose& pose) {
  const Vec3 u = p - pose.translation;
  const Vec3 v = pose.rotation.transpose() * u;
  if (std::abs(v.x()) <= 1e-9 * u.norm()) {
    throw Error(ErrorCode::kAzimuthDenominatorVanishes,
                "azimuth denominator e1^T R^T (p - t) vanishes");
  }
  return {m.distance - u.norm(), m.azimuth_tangent - v.y() / v.x()};
}

// d vec(exp(s^)) / d s^T at s = 0: column k is vec(e_k^), column-major vec.
Eigen::Matrix<double, 9, 3> psi_matrix() {
  Eigen::Matrix<double, 9, 3> psi;
  for (int k = 0; k < 3; ++k) {
    const Mat3 generator = hat(Vec3::Unit(k));
    psi.col(k) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(generator.data());
  }
  return psi;
}

// Unwhitened Jacobian rows of (f_d, f_theta) with respect to (s, t) at s = 0.
void point_jacobian(const Vec3& p, const Pose& pose, const Eigen::Matrix<double, 9, 3>& psi,
                    Eigen::Matrix<double, 1, 6>& row_d, Eigen::Matrix<double, 1, 6>& row_theta) {
  const Mat3& r = pose.rotation;
  const Vec3 u = p - pose.translation;
  const double g = r.col(1).dot(u);
  const double h = r.col(0).dot(u);
  if (std::abs(h) <= 1e-9 * u.norm()) {
    throw Error(ErrorCode::kAzimuthDenominatorVanishes,
                "azimuth denominator e1^T R^T (p - t) vanishes");
  }
  const double h_sq = h * h;

  row_d.head<3>().setZero();
  row_d.tail<3>() = u.transpose() / u.norm();

  // ((g e1^T - h e2^T) kron (u^T R)) Psi / h^2
  const Eigen::RowVector3d a(g, -h, 0.0);
  const Eigen::RowVector3d b = u.transpose() * r;
  Eigen::Matrix<double, 1, 9> kron;
  for (int i = 0; i < 3; ++i) kron.segment<3>(3 * i) = a(i) * b;
  row_theta.head<3>() = kron * psi / h_sq;
  // (h e2^T - g e1^T) R^T / h^2
  const Eigen::RowVector3d c(-g, h, 0.0);
  row_theta.tail<3>() = c * r.transpose() / h_sq;
}

Mat6 checked_normal_matrix(const Eigen::Matrix<double, Eigen::Dynamic, 6>& j) {
  const Mat6 jtj = j.transpose() * j;
  Eigen::SelfAdjointEigenSolver<Mat6> eig(jtj, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(5);
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw Error(ErrorCode::kSingularNormalMatrix,
                "normal matrix J^T J is singular (condition number above 1e12)");
  }
  return jtj;
}

}  // namespace

void CorrespondenceSet::validate() const {
  if (world_points.size() != measurements.size()) {
    throw Error(ErrorCode::kLengthMismatch, "world_points and measurements differ in length");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& m = measurements[i];
    if (!world_points[i].allFinite() || !std::isfinite(m.distance) ||
        !std::isfinite(m.azimuth_tangent)) {
      throw Error(ErrorCode::kBadParams, "non-finite value in correspondence " + std::to_string(i));
    }
    if (!(m.distance > 0.0)) {
      throw Error(ErrorCode::kBadParams, "non-positive distance in correspondence " + std::to_string(i));
    }
  }
}

double CrlbMatrix::rotation_root_trace() const {
  return std::sqrt(cov_bound.topLeftCorner<3, 3>().trace());
}

double CrlbMatrix::translation_root_trace() const {
  return std::sqrt(cov_bound.bottomRightCorner<3, 3>().trace());
}

double coplanarity_ratio(std::span<const Vec3> world_points) {
  // Singular values of [p 1] from the eigenvalues of its 4x4 Gram matrix.
  Eigen::Matrix4d gram = Eigen::Matrix4d::Zero();
  for (const Vec3& p : world_points) {
    const Eigen::Vector4d row(p.x(), p.y(), p.z(), 1.0);
    gram += row * row.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = std::max(eig.eigenvalues()(0), 0.0);
  const double hi = eig.eigenvalues()(3);
  return hi > 0.0 ? std::sqrt(lo / hi) : 0.0;
}

TranslationEstimate estimate_translation(const CorrespondenceSet& corr) {
  check_sizes(corr, kMinPointsTranslation, "translation estimation");
  if (coplanarity_ratio(corr.world_points) <= kCoplanarityThreshold) {
    throw Error(ErrorCode::kCoplanarPoints, "world points are (nearly) coplanar");
  }

  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d atb = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3& p = corr.world_points[i];
    const double d = corr.measurements[i].distance;
    const Eigen::Vector4d a(-2.0 * p.x(), -2.0 * p.y(), -2.0 * p.z(), 1.0);
    ata += a * a.transpose();
    atb += a * (d * d - p.squaredNorm());
  }
  const Eigen::Vector4d x = ata.ldlt().solve(atb);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(ata, Eigen::EigenvaluesOnly);
  TranslationEstimate est;
  est.t_hat = x.head<3>();
  est.sigma_d_sq_hat = std::max(0.0, x(3) - est.t_hat.squaredNorm());
  est.design_matrix_condition = std::sqrt(eig.eigenvalues()(3) / eig.eigenvalues()(0));
  return est;
}

double estimate_sigma_theta(const CorrespondenceSet& corr, const Vec3& t_hat) {
  check_sizes(corr, kMinPointsFullPose, "azimuth variance estimation");
  const AzimuthSystem sys = build_azimuth_system(corr, t_hat);

  // S = blkdiag(spread, 0), so the nonzero spectrum of Q^-1 S is that of
  // P^-1 spread with P the Schur complement of Q's lower-right block (which
  // is spread itself). With spread = L L^T, lambda_max(Q^-1 S) is the
  // reciprocal of lambda_min(L^-1 P L^-T), a symmetric 3x3 problem that stays
  // well defined when Q is singular (noise-free data).
  const Mat3& spread = sys.spread;
  Eigen::LLT<Mat3> llt(spread);
  if (llt.info() != Eigen::Success || spread.determinant() <= 1e-14 * std::pow(spread.trace(), 3)) {
    throw Error(ErrorCode::kDegenerateQ, "point spread around t_hat is degenerate");
  }
  const Mat3 q11 = sys.q.topLeftCorner<3, 3>();
  const Mat3 q12 = sys.q.topRightCorner<3, 3>();
  const Mat3 schur = q11 - q12 * llt.solve(q12.transpose());
  const Mat3 l_inv = llt.matrixL().solve(Mat3::Identity());
  const Mat3 m = l_inv * schur * l_inv.transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues()(0));
}

RotationEstimate estimate_rotation(const CorrespondenceSet& corr, const Vec3& t_hat,
                                   double sigma_theta_sq, SignRule rule) {
  check_sizes(corr, kMinPointsFullPose, "rotation estimation");
  const AzimuthSystem sys = build_azimuth_system(corr, t_hat);
  const Mat6 q_be = sys.q - correction_matrix(sys.spread, sigma_theta_sq);

  Eigen::SelfAdjointEigenSolver<Mat6> eig(q_be);
  const double gap = eig.eigenvalues()(1) - eig.eigenvalues()(0);
  if (gap < 1e-12 * sys.q.trace()) {
    throw Error(ErrorCode::kEigengapDegenerate,
                "two smallest eigenvalues of Q^BE coincide; rotation direction is ambiguous");
  }

  RotationEstimate est;
  est.sigma_theta_sq_hat = sigma_theta_sq;
  est.smallest_eigenvalue = eig.eigenvalues()(0);
  est.eigengap = gap;
  est.r_hat = std::sqrt(2.0) * eig.eigenvectors().col(0);

  // cos(theta_hat_i) has the sign of r1^T (p_i - t) since cos(phi) > 0.
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double h = est.r_hat.head<3>().dot(corr.world_points[i] - t_hat);
    const int predicted = h < 0.0 ? -1 : 1;
    (predicted == corr.measurements[i].cos_sign ? est.sign_votes_agree : est.sign_votes_disagree)++;
    if (rule == SignRule::kFirstPoint) {
      if (h == 0.0) {
        throw Error(ErrorCode::kSignVoteTie, "first point lies on the estimated azimuth plane");
      }
      break;
    }
  }
  if (est.sign_votes_agree == est.sign_votes_disagree) {
    throw Error(ErrorCode::kSignVoteTie, "sign vote over points split evenly");
  }
  if (est.sign_votes_disagree > est.sign_votes_agree) {
    est.r_hat = -est.r_hat;
    std::swap(est.sign_votes_agree, est.sign_votes_disagree);
  }

  const Vec3 r1 = est.r_hat.head<3>();
  const Vec3 r2 = est.r_hat.tail<3>();
  Mat3 assembled;
  assembled.col(0) = r1;
  assembled.col(1) = r2;
  assembled.col(2) = r1.cross(r2);
  est.r_be = project_to_so3(assembled);
  return est;
}

void linearize(const CorrespondenceSet& corr, const Pose& pose, double sigma_d,
               double sigma_theta, GnWorkspace& ws) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  ws.residual.resize(2 * n);
  ws.jacobian.resize(2 * n, 6);
  static const Eigen::Matrix<double, 9, 3> psi = psi_matrix();
  Eigen::Matrix<double, 1, 6> row_d;
  Eigen::Matrix<double, 1, 6> row_theta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const PointResidual f = point_residual(corr.world_points[k], corr.measurements[k], pose);
    point_jacobian(corr.world_points[k], pose, psi, row_d, row_theta);
    ws.residual(2 * i) = f.f_d / sigma_d;
    ws.residual(2 * i + 1) = f.f_theta / sigma_theta;
    ws.jacobian.row(2 * i) = row_d / sigma_d;
    ws.jacobian.row(2 * i + 1) = row_theta / sigma_theta;
  }
}

GnResult gn_refine(const CorrespondenceSet& corr, const Pose& pose0, double sigma_d,
                   double sigma_theta, int iterations) {
  if (iterations < 1) {
    throw Error(ErrorCode::kBadParams, "gn_refine needs at least one iteration");
  }
  GnResult result{pose0, {}};
  for (int it = 0; it < iterations; ++it) {
    linearize(corr, result.pose, sigma_d, sigma_theta, result.workspace);
    const Mat6 jtj = checked_normal_matrix(result.workspace.jacobian);
    const Vec6 jtr = result.workspace.jacobian.transpose() * result.workspace.residual;
    result.workspace.step = -jtj.ldlt().solve(jtr);
    result.pose.rotation = result.pose.rotation * so3_exp(result.workspace.step.head<3>());
    result.pose.translation += result.workspace.step.tail<3>();
  }
  return result;
}

double ml_cost(const CorrespondenceSet& corr, const Pose& pose, double sigma_d,
               double sigma_theta) {
  double sum = 0.0;
  const double wd = 1.0 / (sigma_d * sigma_d);
  const double wt = 1.0 / (sigma_theta * sigma_theta);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const PointResidual f = point_residual(corr.world_points[i], corr.measurements[i], pose);
    sum += f.f_d * f.f_d * wd + f.f_theta * f.f_theta * wt;
  }
  return sum / static_cast<double>(corr.size());
}

EstimateReport bestanp(const CorrespondenceSet& corr, const EstimatorOptions& options) {
  std::string stage = "input";
  try {
    corr.validate();
    check_sizes(corr, kMinPointsFullPose, "BESTAnP");

    EstimateReport report;
    stage = "translation";
    report.t_be = estimate_translation(corr);
    const Vec3& t_hat = report.t_be.t_hat;

    stage = "sigma_theta";
    const double sigma_theta_sq = estimate_sigma_theta(corr, t_hat);

    stage = "rotation";
    report.r_be = estimate_rotation(corr, t_hat, options.bias_correction ? sigma_theta_sq : 0.0,
                                    options.sign_rule);
    report.r_be.sigma_theta_sq_hat = sigma_theta_sq;
    report.pose_be = {report.r_be.r_be, t_hat};

    stage = "gauss_newton";
    double sigma_d_sq = report.t_be.sigma_d_sq_hat;
    if (options.gn_range_variance == RangeVarianceSource::kResidual) {
      double rss = 0.0;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        const double r = corr.measurements[i].distance - (corr.world_points[i] - t_hat).norm();
        rss += r * r;
      }
      sigma_d_sq = rss / static_cast<double>(corr.size() - 3);
    }
    report.sigma_d_used = std::sqrt(std::max(sigma_d_sq, kVarianceFloor));
    report.sigma_theta_used = std::sqrt(std::max(sigma_theta_sq, kVarianceFloor));

    report.ml_cost_initial =
        ml_cost(corr, report.pose_be, report.sigma_d_used, report.sigma_theta_used);
    if (options.gn_iterations > 0) {
      const GnResult gn = gn_refine(corr, report.pose_be, report.sigma_d_used,
                                    report.sigma_theta_used, options.gn_iterations);
      report.pose_gn = gn.pose;
      report.gn_iterations = options.gn_iterations;
    } else {
      report.pose_gn = report.pose_be;
    }
    report.ml_cost_final =
        ml_cost(corr, report.pose_gn, report.sigma_d_used, report.sigma_theta_used);
    report.gn_cost_decreased = report.ml_cost_final <= report.ml_cost_initial + 1e-12;
    return report;
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

CrlbMatrix compute_crlb(std::span<const Vec3> world_points, const Pose& true_pose,
                        double sigma_d, double sigma_theta) {
  static const Eigen::Matrix<double, 9, 3> psi = psi_matrix();
  Eigen::Matrix<double, Eigen::Dynamic, 6> j(2 * static_cast<Eigen::Index>(world_points.size()), 6);
  Eigen::Matrix<double, 1, 6> row_d;
  Eigen::Matrix<double, 1, 6> row_theta;
  for (std::size_t i = 0; i < world_points.size(); ++i) {
    point_jacobian(world_points[i], true_pose, psi, row_d, row_theta);
    const auto r = static_cast<Eigen::Index>(2 * i);
    j.row(r) = row_d / sigma_d;
    j.row(r + 1) = row_theta / sigma_theta;
  }
  const Mat6 fisher = checked_normal_matrix(j);
  CrlbMatrix crlb;
  crlb.cov_bound = fisher.ldlt().solve(Mat6::Identity());
  crlb.cov_bound = 0.5 * (crlb.cov_bound + crlb.cov_bound.transpose()).eval();
  return crlb;
}

}  // namespace bestanp
