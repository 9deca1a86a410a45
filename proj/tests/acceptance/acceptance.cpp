#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bestanp/estimator.hpp"
#include "bestanp/geometry.hpp"
#include "bestanp/harness.hpp"
#include "bestanp/odometry.hpp"
#include "bestanp/random.hpp"
#include "bestanp/sonar_model.hpp"

namespace {

using namespace bestanp;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TrialSpec spec_for(int n, double sigma, int trials, std::uint64_t stream) {
  TrialSpec s;
  s.n = n;
  s.noise = {sigma, sigma, NoiseMechanism::kOnTangent, 0};
  s.trials = trials;
  s.seed = 2024;
  s.stream_index = stream;
  return s;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

const std::vector<int> kCounts{10, 30, 90, 270, 1000};

std::vector<ResultRow> point_count_rows() {
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < kCounts.size(); ++i) {
    const auto out = run_trials(spec_for(kCounts[i], 1e-3, 1000, i));
    rows.push_back(summarize(kCounts[i], out));
  }
  return rows;
}

Verdict noise_free_exactness() {
  RandomStream s(11);
  double worst_r = 0, worst_t = 0;
  double seconds = 0;
  for (int k = 0; k < 100; ++k) {
    const Pose truth = sample_pose(s);
    CorrespondenceSet corr;
    corr.world_points = generate_scene(14, FovSpec{}, truth, s);
    for (const Vec3& p : corr.world_points) {
      corr.measurements.push_back(project_ideal(truth, p).measurement);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const EstimateReport r = bestanp::bestanp(corr);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    worst_r = std::max(worst_r, geodesic_error(r.pose_gn.rotation, truth.rotation));
    worst_t = std::max(worst_t, (r.pose_gn.translation - truth.translation).norm());
  }
  return {worst_r < 1e-8 && worst_t < 1e-8 && seconds < 1.0,
          fmt("max rot %.2e rad, max trans %.2e m, %.3f s", worst_r, worst_t, seconds)};
}

Verdict sqrt_n_consistency() {
  const auto rows = point_count_rows();
  std::vector<double> n, et, er;
  for (const ResultRow& r : rows) {
    n.push_back(r.sweep_value);
    et.push_back(r.rmse_t);
    er.push_back(r.rmse_r);
  }
  const double st = loglog_slope(n, et), sr = loglog_slope(n, er);
  auto in = [](double v) { return v >= -0.65 && v <= -0.35; };
  return {in(st) && in(sr), fmt("slope_t %.3f, slope_r %.3f", st, sr)};
}

Verdict crlb_attainment() {
  bool ok = true;
  std::string detail;
  for (std::size_t i = 3; i < kCounts.size(); ++i) {
    const auto out = run_trials(spec_for(kCounts[i], 1e-3, 1000, i));
    const ResultRow r = summarize(kCounts[i], out);
    const double qt = r.rmse_t / r.crlb_t, qr = r.rmse_r / r.crlb_r;
    ok = ok && qt >= 0.85 && qt <= 1.3 && qr >= 0.85 && qr <= 1.3;
    detail += fmt("n=%d t %.3f r %.3f; ", kCounts[i], qt, qr);
  }
  return {ok, detail};
}

Verdict single_gn_sufficiency() {
  bool ok = true;
  std::string detail;
  for (const int n : {10, 270, 1000}) {
    TrialSpec one = spec_for(n, 1e-3, 1000, 40 + n);
    one.with_crlb = false;
    TrialSpec ten = one;
    ten.estimator.gn_iterations = 10;
    const ResultRow a = summarize(n, run_trials(one));
    const ResultRow b = summarize(n, run_trials(ten));
    const double gt = std::abs(a.rmse_t / b.rmse_t - 1), gr = std::abs(a.rmse_r / b.rmse_r - 1);
    const double limit = n >= 270 ? 0.05 : 0.25;
    ok = ok && gt <= limit && gr <= limit;
    detail += fmt("n=%d gap t %.3f r %.3f; ", n, gt, gr);
  }
  return {ok, detail};
}

struct Interval {
  double rmse, lo, hi;
};

// 95% interval of the RMSE from the normal approximation of the mean squared error.
Interval rmse_interval(const std::vector<TrialOutcome>& out, bool translation) {
  std::vector<double> v;
  for (const TrialOutcome& o : out) {
    if (!o.failed) v.push_back(translation ? o.sq_err_t : o.sq_err_r);
  }
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double var = 0;
  for (double x : v) var += (x - m) * (x - m);
  var /= v.size() - 1;
  const double half = 1.96 * std::sqrt(var / v.size());
  return {std::sqrt(m), std::sqrt(std::max(0.0, m - half)), std::sqrt(m + half)};
}

Verdict noise_mechanism_equivalence() {
  bool ok = true;
  std::string detail;
  int k = 0;
  for (const double sigma : {1e-4, 1e-3, 1e-2}) {
    TrialSpec tan = spec_for(14, sigma, 1000, 60 + k++);
    tan.with_crlb = false;
    TrialSpec ang = tan;
    ang.noise.mechanism = NoiseMechanism::kOnAngle;
    const auto a = run_trials(tan), b = run_trials(ang);
    const Interval ta = rmse_interval(a, true), tb = rmse_interval(b, true);
    const Interval ra = rmse_interval(a, false), rb = rmse_interval(b, false);
    const bool overlap = ta.lo <= tb.hi && tb.lo <= ta.hi;
    const double gap = std::abs(ra.rmse - rb.rmse) / std::min(ra.rmse, rb.rmse);
    ok = ok && overlap && gap < 0.1;
    detail += fmt("sigma %.0e t [%.3g,%.3g] vs [%.3g,%.3g] r %.3g vs %.3g gap %.3f; ", sigma,
                  ta.lo, ta.hi, tb.lo, tb.hi, ra.rmse, rb.rmse, gap);
  }
  return {ok, detail};
}

Verdict bias_elimination_ablation() {
  TrialSpec on = spec_for(1000, 1e-3, 1000, 80);
  on.noise.sigma_theta = 1e-2;
  on.with_crlb = false;
  TrialSpec off = on;
  off.estimator.bias_correction = false;
  const auto a = run_trials(on), b = run_trials(off);
  // one-sided paired z test on per-trial squared rotation error
  std::vector<double> diff;
  double be_on = 0, be_off = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].failed || b[i].failed) continue;
    diff.push_back(b[i].sq_err_r - a[i].sq_err_r);
    be_on += a[i].sq_err_r_be;
    be_off += b[i].sq_err_r_be;
  }
  double m = 0;
  for (double x : diff) m += x;
  m /= diff.size();
  double var = 0;
  for (double x : diff) var += (x - m) * (x - m);
  var /= diff.size() - 1;
  const double z = m / std::sqrt(var / diff.size());
  const double r_on = rmse_interval(a, false).rmse, r_off = rmse_interval(b, false).rmse;
  return {r_off > r_on && z > 1.645,
          fmt("RMSE_R corrected %.4g, C=0 %.4g, z %.2f (closed form %.4g vs %.4g)", r_on, r_off,
              z, std::sqrt(be_on / diff.size()), std::sqrt(be_off / diff.size()))};
}

Verdict jacobian_correctness() {
  RandomStream s(13);
  const double h = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose truth = sample_pose(s);
    CorrespondenceSet corr;
    corr.world_points = generate_scene(14, FovSpec{}, truth, s);
    for (const Vec3& p : corr.world_points) {
      corr.measurements.push_back(
          apply_noise(project_ideal(truth, p).measurement, {1e-3, 1e-3}, s));
    }
    Pose pose = truth;
    pose.rotation = pose.rotation * so3_exp(0.05 * s.unit_vector());
    pose.translation += 0.05 * s.unit_vector();
    GnWorkspace ws;
    linearize(corr, pose, 1e-3, 1e-3, ws);
    for (int k = 0; k < 6; ++k) {
      auto shifted = [&](double sign) {
        Vec6 d = Vec6::Zero();
        d(k) = sign * h;
        Pose p = pose;
        p.rotation = p.rotation * so3_exp(d.head<3>());
        p.translation += d.tail<3>();
        GnWorkspace w;
        linearize(corr, p, 1e-3, 1e-3, w);
        return w.residual;
      };
      const Eigen::VectorXd fd = (shifted(1) - shifted(-1)) / (2 * h);
      worst = std::max(worst, (fd - ws.jacobian.col(k)).norm() / ws.jacobian.col(k).norm());
    }
  }
  return {worst < 1e-5, fmt("worst column relative error %.2e", worst)};
}

Verdict timing() {
  const std::vector<int> n{10, 1000};
  const auto rows = run_timing(n, 100, 17);
  const double t10 = rows[0].mean_seconds, t1000 = rows[1].mean_seconds;
  return {t10 <= 2e-3 && t1000 <= 35e-3,
          fmt("n=10 %.3f ms, n=1000 %.3f ms", 1e3 * t10, 1e3 * t1000)};
}

OdometryResult odometry_run(TrajectoryShape shape, std::uint64_t seed) {
  TrajectoryParams tp;
  tp.shape = shape;
  const Trajectory truth = generate_trajectory(tp);
  RandomStream scene_stream = RandomStream::derive(seed, {1});
  const auto scene = generate_odometry_scene(truth, FovSpec{}, scene_stream);
  OdometryConfig cfg;
  RandomStream run_stream = RandomStream::derive(seed, {2});
  return run_odometry(scene, truth, cfg, run_stream);
}

Verdict odometry_bands() {
  const OdometryResult e = odometry_run(TrajectoryShape::kEightShaped, 7);
  const OdometryResult c = odometry_run(TrajectoryShape::kCircle, 7);
  const bool e_done = e.termination == Termination::kCompleted;
  const bool c_done = c.termination == Termination::kCompleted;
  const bool ok = e_done && c_done && e.errors.ate_t >= 0.002 && e.errors.ate_t <= 0.05 &&
                  e.errors.ate_r >= 0.2 && e.errors.ate_r <= 5.0 && c.errors.ate_r >= 0.2 &&
                  c.errors.ate_r <= 6.0;
  return {ok, fmt("eight %s at %zu ATE_t %.4g m ATE_r %.3g deg; circle %s at %zu ATE_r %.3g deg",
                  to_string(e.termination).c_str(), e.terminated_at, e.errors.ate_t,
                  e.errors.ate_r, to_string(c.termination).c_str(), c.terminated_at,
                  c.errors.ate_r)};
}

Verdict variance_consistency() {
  auto rel_errors = [](int n, int trials, std::uint64_t stream) {
    TrialSpec s = spec_for(n, 1e-2, trials, stream);
    s.with_crlb = false;
    std::vector<double> ed, et;
    for (const TrialOutcome& o : run_trials(s)) {
      if (o.failed) continue;
      ed.push_back(std::abs(o.sigma_d_sq_hat / 1e-4 - 1));
      et.push_back(std::abs(o.sigma_theta_sq_hat / 1e-4 - 1));
    }
    return std::pair{median(ed), median(et)};
  };
  const auto [d4, t4] = rel_errors(10000, 100, 90);
  const auto [d5, t5] = rel_errors(100000, 100, 91);
  const bool ok = d4 < 0.15 && t4 < 0.15 && d5 < d4 && t5 < t4;
  return {ok, fmt("median rel err n=1e4 d %.3f theta %.3f; n=1e5 d %.3f theta %.3f", d4, t4, d5,
                  t5)};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

const std::vector<Criterion> kCriteria{
    {"noise-free exactness", noise_free_exactness},
    {"sqrt-n consistency", sqrt_n_consistency},
    {"CRLB attainment", crlb_attainment},
    {"single GN sufficiency", single_gn_sufficiency},
    {"noise mechanism equivalence", noise_mechanism_equivalence},
    {"bias elimination ablation", bias_elimination_ablation},
    {"Jacobian correctness", jacobian_correctness},
    {"timing", timing},
    {"odometry bands", odometry_bands},
    {"variance estimator consistency", variance_consistency},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bestanp acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")
      ->check(CLI::Range(1, static_cast<int>(kCriteria.size())));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (std::size_t i = 0; i < kCriteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Verdict v;
    try {
      v = kCriteria[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && v.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, kCriteria[i].name, v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
