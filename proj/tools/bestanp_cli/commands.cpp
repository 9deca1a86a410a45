#include "bestanp_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "bestanp/error.hpp"
#include "bestanp/estimator.hpp"
#include "bestanp/harness.hpp"
#include "bestanp/odometry.hpp"
#include "bestanp_cli/formats.hpp"

namespace bestanp::cli {
namespace {

using Clock = std::chrono::system_clock;

std::string pick_format(const GlobalOptions& g, const char* fallback) {
  const std::string f = g.format.empty() ? fallback : g.format;
  if (f != "csv" && f != "json") throw InputError("--format must be csv or json");
  return f;
}

RunManifest start_manifest(const std::string& command, json config, std::uint64_t seed,
                           const std::string& input_hash) {
  RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.seed = seed;
  m.input_hash = input_hash;
  m.started = Clock::now();
  return m;
}

// Primary output: to --out with a manifest, else to stdout.
void emit(const GlobalOptions& g, const std::string& content, const RunManifest& manifest,
          std::ostream& out) {
  if (g.out.empty()) {
    out << content;
  } else {
    write_output(g.out, content, manifest);
  }
}

std::string csv_join(std::initializer_list<double> values) {
  std::string line;
  for (double v : values) {
    if (!line.empty()) line += ',';
    line += format_double(v);
  }
  return line;
}

int report_error(std::ostream& err, const Error& e) {
  err << "error";
  if (!e.stage().empty()) err << " [stage " << e.stage() << "]";
  err << " (" << to_string(e.code()) << "): " << e.what() << '\n';
  return kExitEstimator;
}

// Average reprojection error: (1/N) sqrt(sum of squared image-plane errors).
double average_reprojection_error(const CorrespondenceSet& corr, const Pose& pose) {
  double sum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double e = reprojection_error(pose, corr.world_points[i], corr.measurements[i].image_point());
    sum += e * e;
  }
  return std::sqrt(sum) / static_cast<double>(corr.size());
}

}  // namespace

NoiseModel NoiseFlags::resolve(NoiseModel base) const {
  if (sigma) base.sigma_d = base.sigma_theta = *sigma;
  if (sigma_d) base.sigma_d = *sigma_d;
  if (sigma_theta) base.sigma_theta = *sigma_theta;
  if (!(base.sigma_d >= 0) || !(base.sigma_theta >= 0) || !std::isfinite(base.sigma_d) ||
      !std::isfinite(base.sigma_theta)) {
    throw InputError("noise sigmas must be finite and >= 0");
  }
  base.mechanism = mechanism_from_string(mechanism);
  return base;
}

int cmd_estimate(const std::string& input, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err) {
  const std::string format = pick_format(g, "json");
  const std::string text = read_file(input);
  const CorrespondenceFile file = correspondence_from_json(parse_json(text, input));
  RunManifest manifest = start_manifest("estimate", {{"input", input}}, g.seed.value_or(0),
                                        git_blob_hash(text));

  EstimateReport report;
  try {
    report = bestanp::bestanp(file.corr);
  } catch (const Error& e) {
    return report_error(err, e);
  }

  const Vec3 rv = so3_log(report.pose_gn.rotation);
  const Vec3& t = report.pose_gn.translation;
  const double are = average_reprojection_error(file.corr, report.pose_gn);
  json doc = {{"schema_version", kSchemaVersion},
              {"n", file.corr.size()},
              {"pose", pose_to_json(report.pose_gn)},
              {"pose_closed_form", pose_to_json(report.pose_be)},
              {"sigma_d_hat", std::sqrt(report.t_be.sigma_d_sq_hat)},
              {"sigma_theta_hat", std::sqrt(report.r_be.sigma_theta_sq_hat)},
              {"ml_cost_initial", report.ml_cost_initial},
              {"ml_cost_final", report.ml_cost_final},
              {"are", are}};
  double err_r = 0.0;
  double err_t = 0.0;
  if (file.truth) {
    err_r = geodesic_error(file.truth->rotation, report.pose_gn.rotation);
    err_t = (file.truth->translation - t).norm();
    doc["rotation_error_rad"] = err_r;
    doc["translation_error_m"] = err_t;
  }

  std::string content;
  if (format == "json") {
    content = doc.dump(2) + "\n";
  } else {
    content = "tx,ty,tz,rx,ry,rz,sigma_d_hat,sigma_theta_hat,ml_cost_initial,ml_cost_final,are";
    if (file.truth) content += ",rotation_error_rad,translation_error_m";
    content += '\n';
    content += csv_join({t.x(), t.y(), t.z(), rv.x(), rv.y(), rv.z(),
                         std::sqrt(report.t_be.sigma_d_sq_hat),
                         std::sqrt(report.r_be.sigma_theta_sq_hat), report.ml_cost_initial,
                         report.ml_cost_final, are});
    if (file.truth) content += ',' + csv_join({err_r, err_t});
    content += '\n';
  }
  // The JSON summary always reaches stdout; --out additionally stores the chosen format.
  if (!g.out.empty()) {
    write_output(g.out, content, manifest);
    out << doc.dump(2) << '\n';
  } else {
    out << content;
  }
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err) {
  (void)err;
  if (o.n < 1) throw InputError("--n must be >= 1");
  if (!g.format.empty() && g.format != "json") throw InputError("simulate writes json only");
  const NoiseModel noise = o.noise.resolve(NoiseModel{});
  try {
    o.fov.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  const std::uint64_t seed = g.seed.value_or(0);
  const json config = {{"n", o.n}, {"noise", noise_to_json(noise)}, {"fov", fov_to_json(o.fov)}};
  RunManifest manifest = start_manifest("simulate", config, seed, git_blob_hash(config.dump()));

  RandomStream stream = RandomStream::derive(seed, {0});
  CorrespondenceFile file;
  const Pose truth = sample_pose(stream);
  try {
    file.corr.world_points = generate_scene(o.n, o.fov, truth, stream);
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  for (const Vec3& p : file.corr.world_points) {
    file.corr.measurements.push_back(apply_noise(project_ideal(truth, p).measurement, noise, stream));
  }
  file.truth = truth;
  emit(g, correspondence_to_json(file).dump(2) + "\n", manifest, out);
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
              std::ostream& err) {
  const std::string format = pick_format(g, "csv");
  const std::string text = read_file(config_path);
  json j = parse_json(text, config_path);
  if (g.seed) j["seed"] = *g.seed;
  const ExperimentConfig cfg = experiment_from_json(j);
  RunManifest manifest = start_manifest("sweep", j, cfg.seed, git_blob_hash(text));

  std::vector<ResultRow> rows;
  try {
    rows = run_sweep(cfg);
  } catch (const Error& e) {
    return report_error(err, e);
  }
  const std::string content =
      format == "csv" ? sweep_csv(rows) : sweep_json(cfg, rows).dump(2) + "\n";
  emit(g, content, manifest, out);

  for (const ResultRow& r : rows) {
    if (r.trials > 0 && r.failures == r.trials) {
      err << "sweep value " << format_double(r.sweep_value) << " failed in all " << r.trials
          << " trials\n";
      return kExitSweepExhausted;
    }
  }
  return kExitOk;
}

int cmd_odometry(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err) {
  const std::string format = pick_format(g, "csv");
  const std::string text = read_file(config_path);
  const json j = parse_json(text, config_path);
  const OdometrySetup setup = odometry_from_json(j, g.seed);
  RunManifest manifest = start_manifest("odometry", j, setup.seed, git_blob_hash(text));

  RandomStream stream = RandomStream::derive(setup.seed, {2});
  OdometryResult result;
  try {
    result = run_odometry(setup.scene, setup.truth, setup.config, stream);
  } catch (const Error& e) {
    return report_error(err, e);
  }

  const std::size_t total = setup.truth.size();
  const bool completed = result.termination == Termination::kCompleted;
  json errors = {{"schema_version", kSchemaVersion},
                 {"ate_t_m", result.errors.ate_t},
                 {"ate_r_deg", result.errors.ate_r},
                 {"rpe_t_m", result.errors.rpe_t},
                 {"rpe_r_deg", result.errors.rpe_r},
                 {"termination", to_string(result.termination)},
                 {"terminated_at", result.terminated_at},
                 {"frames_total", total},
                 {"frames_estimated", result.estimate.size()},
                 {"partial", !completed},
                 {"map_points", result.map.size()}};
  if (!result.message.empty()) errors["message"] = result.message;

  std::string content;
  if (format == "csv") {
    content = "frame,tx,ty,tz,rx,ry,rz,ml_cost,n_points\n";
    for (const FrameRecord& f : result.frames) {
      const Vec3 rv = so3_log(f.pose.rotation);
      const Vec3& t = f.pose.translation;
      content += std::to_string(f.frame) + ',' +
                 csv_join({t.x(), t.y(), t.z(), rv.x(), rv.y(), rv.z(), f.ml_cost}) + ',' +
                 std::to_string(f.n_points) + '\n';
    }
  } else {
    json frames = json::array();
    for (const FrameRecord& f : result.frames) {
      frames.push_back({{"frame", f.frame},
                        {"pose", pose_to_json(f.pose)},
                        {"ml_cost", f.ml_cost},
                        {"n_points", f.n_points}});
    }
    content = json{{"schema_version", kSchemaVersion}, {"frames", frames}, {"errors", errors}}.dump(2) + "\n";
  }

  if (!g.out.empty()) {
    write_output(g.out, content, manifest);
    write_output(g.out + ".errors.json", errors.dump(2) + "\n", manifest);
    out << errors.dump(2) << '\n';
  } else if (format == "csv") {
    out << content;
    err << errors.dump(2) << '\n';
  } else {
    out << content;
  }

  if (!completed) {
    err << "odometry stopped at frame " << result.terminated_at << " of " << total << " ("
        << to_string(result.termination) << "): " << result.message << '\n';
    if (4 * result.terminated_at < total) {
      return result.termination == Termination::kEstimatorFailure ? kExitEstimator
                                                                   : kExitTrackingLost;
    }
  }
  return kExitOk;
}

int cmd_crlb(const std::string& input, const NoiseFlags& noise_flags, const GlobalOptions& g,
             std::ostream& out, std::ostream& err) {
  const std::string format = pick_format(g, "json");
  const std::string text = read_file(input);
  const CorrespondenceFile file = correspondence_from_json(parse_json(text, input));
  if (!file.truth) throw InputError("crlb needs a 'truth' block in " + input);
  const NoiseModel noise = noise_flags.resolve(NoiseModel{1e-3, 1e-3, NoiseMechanism::kOnTangent, 0});
  if (noise.sigma_d <= 0 || noise.sigma_theta <= 0) throw InputError("crlb needs positive sigmas");
  RunManifest manifest = start_manifest(
      "crlb", {{"input", input}, {"noise", noise_to_json(noise)}}, g.seed.value_or(0),
      git_blob_hash(text));

  CrlbMatrix crlb;
  try {
    crlb = compute_crlb(file.corr.world_points, *file.truth, noise.sigma_d, noise.sigma_theta);
  } catch (const Error& e) {
    return report_error(err, e);
  }

  std::string content;
  if (format == "json") {
    json m = json::array();
    for (int r = 0; r < 6; ++r) {
      json row = json::array();
      for (int c = 0; c < 6; ++c) row.push_back(crlb.cov_bound(r, c));
      m.push_back(row);
    }
    content = json{{"schema_version", kSchemaVersion},
                   {"order", {"s_x", "s_y", "s_z", "t_x", "t_y", "t_z"}},
                   {"matrix", m},
                   {"rotation_root_trace", crlb.rotation_root_trace()},
                   {"translation_root_trace", crlb.translation_root_trace()}}
                  .dump(2) +
              "\n";
  } else {
    content = "row,c0,c1,c2,c3,c4,c5\n";
    for (int r = 0; r < 6; ++r) {
      content += std::to_string(r);
      for (int c = 0; c < 6; ++c) content += ',' + format_double(crlb.cov_bound(r, c));
      content += '\n';
    }
  }
  emit(g, content, manifest, out);
  return kExitOk;
}

int cmd_timing(const TimingOptions& o, const GlobalOptions& g, std::ostream& out,
               std::ostream& err) {
  const std::string format = pick_format(g, "csv");
  if (o.n_values.empty()) throw InputError("--n needs at least one value");
  for (int n : o.n_values) {
    if (n < static_cast<int>(kMinPointsFullPose)) throw InputError("--n values must be >= 6");
  }
  if (o.repetitions < 1) throw InputError("--repetitions must be >= 1");
  const std::uint64_t seed = g.seed.value_or(0);
  const json config = {{"n", o.n_values}, {"repetitions", o.repetitions}};
  RunManifest manifest = start_manifest("timing", config, seed, git_blob_hash(config.dump()));

  std::vector<TimingRow> rows;
  try {
    rows = run_timing(o.n_values, o.repetitions, seed);
  } catch (const Error& e) {
    return report_error(err, e);
  }
  std::string content;
  if (format == "csv") {
    content = "n,mean_seconds\n";
    for (const TimingRow& r : rows) content += std::to_string(r.n) + ',' + format_double(r.mean_seconds) + '\n';
  } else {
    json arr = json::array();
    for (const TimingRow& r : rows) arr.push_back({{"n", r.n}, {"mean_seconds", r.mean_seconds}});
    content = json{{"schema_version", kSchemaVersion}, {"rows", arr}}.dump(2) + "\n";
  }
  emit(g, content, manifest, out);
  return kExitOk;
}

}  // namespace bestanp::cli
