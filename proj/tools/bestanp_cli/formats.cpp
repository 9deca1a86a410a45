#include "bestanp_cli/formats.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <openssl/evp.h>

#include "bestanp/error.hpp"

#ifndef BESTANP_VERSION
#define BESTANP_VERSION "unknown"
#endif

namespace bestanp::cli {
namespace {

double finite_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw InputError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(what + " must be finite");
  return v;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("field '") + key + "' has the wrong type");
  }
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return finite_number(j.at(key), std::string("field '") + key + "'");
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(origin + ": " + e.what());
  }
}

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("expected an array of 3 numbers");
  return {finite_number(j[0], "coordinate"), finite_number(j[1], "coordinate"),
          finite_number(j[2], "coordinate")};
}

json pose_to_json(const Pose& pose) {
  return {{"rotation_vector", vec_to_json(so3_log(pose.rotation))},
          {"translation", vec_to_json(pose.translation)}};
}

Pose pose_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rotation_vector") || !j.contains("translation")) {
    throw InputError("pose needs 'rotation_vector' and 'translation'");
  }
  Pose pose;
  pose.rotation = so3_exp(vec_from_json(j.at("rotation_vector")));
  pose.translation = vec_from_json(j.at("translation"));
  return pose;
}

CorrespondenceFile correspondence_from_json(const json& j) {
  if (!j.is_object() || !j.contains("points") || !j.contains("measurements")) {
    throw InputError("correspondence file needs 'points' and 'measurements'");
  }
  const json& pts = j.at("points");
  const json& ms = j.at("measurements");
  if (!pts.is_array() || !ms.is_array()) throw InputError("'points' and 'measurements' must be arrays");
  if (pts.size() != ms.size()) {
    throw InputError("'points' has " + std::to_string(pts.size()) + " entries but 'measurements' has " +
                     std::to_string(ms.size()));
  }
  CorrespondenceFile file;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    file.corr.world_points.push_back(vec_from_json(pts[i]));
    const json& m = ms[i];
    if (!m.is_object() || !m.contains("d") || !m.contains("theta")) {
      throw InputError("measurement " + std::to_string(i) + " needs 'd' and 'theta'");
    }
    const double d = finite_number(m.at("d"), "d");
    const double theta = finite_number(m.at("theta"), "theta");
    if (!(d > 0)) throw InputError("measurement " + std::to_string(i) + " has non-positive d");
    if (std::abs(theta) >= std::numbers::pi / 2) {
      throw InputError("measurement " + std::to_string(i) + " has |theta| >= pi/2");
    }
    file.corr.measurements.push_back(SonarMeasurement::from_angle(d, theta));
  }
  if (j.contains("truth")) file.truth = pose_from_json(j.at("truth"));
  return file;
}

json correspondence_to_json(const CorrespondenceFile& file) {
  json pts = json::array();
  json ms = json::array();
  for (std::size_t i = 0; i < file.corr.size(); ++i) {
    pts.push_back(vec_to_json(file.corr.world_points[i]));
    ms.push_back({{"d", file.corr.measurements[i].distance},
                  {"theta", file.corr.measurements[i].azimuth()}});
  }
  json j = {{"schema_version", kSchemaVersion}, {"points", pts}, {"measurements", ms}};
  if (file.truth) j["truth"] = pose_to_json(*file.truth);
  return j;
}

FovSpec fov_from_json(const json& j) {
  FovSpec fov;
  if (j.is_null()) return fov;
  fov.max_distance = number_or(j, "max_distance", fov.max_distance);
  fov.azimuth_halfwidth = number_or(j, "azimuth_halfwidth", fov.azimuth_halfwidth);
  fov.elevation_halfwidth = number_or(j, "elevation_halfwidth", fov.elevation_halfwidth);
  try {
    fov.validate();
  } catch (const Error& e) {
    throw InputError(std::string("fov: ") + e.what());
  }
  return fov;
}

json fov_to_json(const FovSpec& fov) {
  return {{"max_distance", fov.max_distance},
          {"azimuth_halfwidth", fov.azimuth_halfwidth},
          {"elevation_halfwidth", fov.elevation_halfwidth}};
}

NoiseMechanism mechanism_from_string(const std::string& name) {
  if (name == "tangent") return NoiseMechanism::kOnTangent;
  if (name == "angle") return NoiseMechanism::kOnAngle;
  throw InputError("noise mechanism must be 'tangent' or 'angle', got '" + name + "'");
}

std::string to_string(NoiseMechanism mechanism) {
  return mechanism == NoiseMechanism::kOnTangent ? "tangent" : "angle";
}

NoiseModel noise_from_json(const json& j, NoiseModel base) {
  if (j.is_null()) return base;
  if (j.contains("sigma")) base.sigma_d = base.sigma_theta = number_or(j, "sigma", 0.0);
  base.sigma_d = number_or(j, "sigma_d", base.sigma_d);
  base.sigma_theta = number_or(j, "sigma_theta", base.sigma_theta);
  if (base.sigma_d < 0 || base.sigma_theta < 0) throw InputError("noise sigmas must be >= 0");
  if (j.contains("mechanism")) base.mechanism = mechanism_from_string(get_or<std::string>(j, "mechanism", ""));
  return base;
}

json noise_to_json(const NoiseModel& noise) {
  return {{"sigma_d", noise.sigma_d},
          {"sigma_theta", noise.sigma_theta},
          {"mechanism", to_string(noise.mechanism)}};
}

EstimatorOptions estimator_from_json(const json& j) {
  EstimatorOptions o;
  if (j.is_null()) return o;
  o.gn_iterations = get_or<int>(j, "gn_iterations", o.gn_iterations);
  if (o.gn_iterations < 0) throw InputError("gn_iterations must be >= 0");
  o.bias_correction = get_or<bool>(j, "bias_correction", o.bias_correction);
  const auto rule = get_or<std::string>(j, "sign_rule", "majority");
  if (rule == "majority") {
    o.sign_rule = SignRule::kMajority;
  } else if (rule == "first_point") {
    o.sign_rule = SignRule::kFirstPoint;
  } else {
    throw InputError("sign_rule must be 'majority' or 'first_point'");
  }
  const auto source = get_or<std::string>(j, "gn_range_variance", "residual");
  if (source == "residual") {
    o.gn_range_variance = RangeVarianceSource::kResidual;
  } else if (source == "bias_eliminated") {
    o.gn_range_variance = RangeVarianceSource::kBiasEliminated;
  } else {
    throw InputError("gn_range_variance must be 'residual' or 'bias_eliminated'");
  }
  return o;
}

json estimator_to_json(const EstimatorOptions& o) {
  return {{"gn_iterations", o.gn_iterations},
          {"bias_correction", o.bias_correction},
          {"sign_rule", o.sign_rule == SignRule::kMajority ? "majority" : "first_point"},
          {"gn_range_variance",
           o.gn_range_variance == RangeVarianceSource::kResidual ? "residual" : "bias_eliminated"}};
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw InputError("sweep config must be a JSON object");
  ExperimentConfig cfg;
  try {
    cfg.sweep_kind = sweep_kind_from_string(get_or<std::string>(j, "sweep_kind", ""));
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  if (!j.contains("sweep_values") || !j.at("sweep_values").is_array()) {
    throw InputError("sweep config needs a 'sweep_values' array");
  }
  for (const json& v : j.at("sweep_values")) cfg.sweep_values.push_back(finite_number(v, "sweep value"));
  cfg.trials = get_or<int>(j, "trials", cfg.trials);
  cfg.base_n = get_or<int>(j, "n", cfg.base_n);
  cfg.base_noise = noise_from_json(j.value("noise", json()), cfg.base_noise);
  cfg.fov = fov_from_json(j.value("fov", json()));
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.estimator = estimator_from_json(j.value("estimator", json()));
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  return cfg;
}

OdometrySetup odometry_from_json(const json& j, std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw InputError("odometry config must be a JSON object");
  OdometrySetup setup;
  setup.seed = seed_override ? *seed_override : get_or<std::uint64_t>(j, "seed", 0);

  const json tj = j.value("trajectory", json::object());
  TrajectoryParams tp;
  const auto shape = get_or<std::string>(tj, "shape", "eight");
  if (shape == "eight") {
    tp.shape = TrajectoryShape::kEightShaped;
  } else if (shape == "circle") {
    tp.shape = TrajectoryShape::kCircle;
  } else if (shape == "file") {
    tp.shape = TrajectoryShape::kFromFile;
    if (!tj.contains("poses") || !tj.at("poses").is_array()) {
      throw InputError("trajectory shape 'file' needs a 'poses' array");
    }
    for (const json& p : tj.at("poses")) tp.poses.push_back(pose_from_json(p));
    if (tj.contains("timestamps")) {
      for (const json& t : tj.at("timestamps")) tp.timestamps.push_back(finite_number(t, "timestamp"));
    }
  } else {
    throw InputError("trajectory shape must be 'eight', 'circle' or 'file'");
  }
  tp.scale = number_or(tj, "scale", tp.scale);
  tp.frames = get_or<int>(tj, "frames", tp.frames);
  tp.duration = number_or(tj, "duration", tp.duration);
  tp.height = number_or(tj, "height", tp.height);
  tp.pitch = number_or(tj, "pitch", tp.pitch);
  tp.phase = number_or(tj, "phase", tp.phase);

  OdometryConfig& c = setup.config;
  c.init_frames = get_or<int>(j, "init_frames", c.init_frames);
  c.init_sigma_rot = number_or(j, "init_sigma_rot", c.init_sigma_rot);
  c.init_sigma_trans = number_or(j, "init_sigma_trans", c.init_sigma_trans);
  c.min_track_points = get_or<int>(j, "min_track_points", c.min_track_points);
  c.gate_threshold = number_or(j, "gate_threshold", c.gate_threshold);
  c.outlier_rounds = get_or<int>(j, "outlier_rounds", c.outlier_rounds);
  c.track_gate_factor = number_or(j, "track_gate_factor", c.track_gate_factor);
  c.abnormal_jump_factor = number_or(j, "abnormal_jump_factor", c.abnormal_jump_factor);
  c.fov = fov_from_json(j.value("fov", json()));
  c.noise = noise_from_json(j.value("noise", json()), c.noise);
  c.estimator = estimator_from_json(j.value("estimator", json()));

  try {
    c.validate();
    setup.truth = generate_trajectory(tp);
    const json sj = j.value("scene", json::object());
    if (sj.contains("points")) {
      for (const json& p : sj.at("points")) setup.scene.push_back(vec_from_json(p));
    } else {
      SceneParams sp;
      sp.target_visible = number_or(sj, "target_visible", sp.target_visible);
      sp.tolerance = number_or(sj, "tolerance", sp.tolerance);
      sp.depth = number_or(sj, "depth", sp.depth);
      sp.relief = number_or(sj, "relief", sp.relief);
      sp.wavelength = number_or(sj, "wavelength", sp.wavelength);
      sp.jitter = number_or(sj, "jitter", sp.jitter);
      RandomStream scene_stream = RandomStream::derive(setup.seed, {1});
      setup.scene = generate_odometry_scene(setup.truth, c.fov, scene_stream, sp);
    }
  } catch (const Error& e) {
    throw InputError(e.what());
  }

  if (j.contains("transform")) {
    const Pose g = pose_from_json(j.at("transform"));
    for (Vec3& p : setup.scene) p = g.to_world(p);
    for (Pose& p : setup.truth.poses) p = g * p;
  }
  return setup;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string sweep_csv(const std::vector<ResultRow>& rows) {
  std::string out = "sweep_value,rmse_t,rmse_r,crlb_t,crlb_r,mean_runtime_s,failures\n";
  for (const ResultRow& r : rows) {
    out += format_double(r.sweep_value) + ',' + format_double(r.rmse_t) + ',' +
           format_double(r.rmse_r) + ',' + format_double(r.crlb_t) + ',' +
           format_double(r.crlb_r) + ',' + format_double(r.mean_runtime) + ',' +
           std::to_string(r.failures) + '\n';
  }
  return out;
}

json sweep_json(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const ResultRow& r : rows) {
    json row = {{"sweep_value", r.sweep_value}, {"rmse_t", r.rmse_t},     {"rmse_r", r.rmse_r},
                {"crlb_t", r.crlb_t},           {"crlb_r", r.crlb_r},     {"mean_runtime_s", r.mean_runtime},
                {"failures", r.failures},       {"trials", r.trials}};
    if (!r.variant.empty()) row["variant"] = r.variant;
    arr.push_back(row);
  }
  return {{"schema_version", kSchemaVersion}, {"sweep_kind", to_string(cfg.sweep_kind)}, {"rows", arr}};
}

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

void atomic_write(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw InputError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string tool_version() { return BESTANP_VERSION; }

json RunManifest::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"tool", "bestanp"},
          {"tool_version", tool_version()},
          {"command", command},
          {"config", config},
          {"seed", seed},
          {"input_hash", input_hash},
          {"output", output_path},
          {"output_hash", output_hash},
          {"started_at", iso_timestamp(started)},
          {"finished_at", iso_timestamp(finished)}};
}

void write_output(const std::string& path, std::string_view content, RunManifest manifest) {
  atomic_write(path, content);
  manifest.output_path = path;
  manifest.output_hash = git_blob_hash(content);
  manifest.finished = std::chrono::system_clock::now();
  atomic_write(path + ".manifest.json", manifest.to_json().dump(2) + "\n");
}

}  // namespace bestanp::cli
