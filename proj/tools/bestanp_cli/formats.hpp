#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bestanp/estimator.hpp"
#include "bestanp/harness.hpp"
#include "bestanp/odometry.hpp"

namespace bestanp::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Malformed files, flags or configs; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorrespondenceFile {
  CorrespondenceSet corr;
  std::optional<Pose> truth;
};

std::string read_file(const std::string& path);
json parse_json(const std::string& text, const std::string& origin);

CorrespondenceFile correspondence_from_json(const json& j);
json correspondence_to_json(const CorrespondenceFile& file);

json pose_to_json(const Pose& pose);
Pose pose_from_json(const json& j);
json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const json& j);

FovSpec fov_from_json(const json& j);
json fov_to_json(const FovSpec& fov);
NoiseModel noise_from_json(const json& j, NoiseModel base = {});
json noise_to_json(const NoiseModel& noise);
EstimatorOptions estimator_from_json(const json& j);
json estimator_to_json(const EstimatorOptions& options);
NoiseMechanism mechanism_from_string(const std::string& name);
std::string to_string(NoiseMechanism mechanism);

ExperimentConfig experiment_from_json(const json& j);

struct OdometrySetup {
  Trajectory truth;
  std::vector<Vec3> scene;
  OdometryConfig config;
  std::uint64_t seed = 0;
};

// Builds the trajectory and scene the config describes, then applies the
// optional rigid "transform" to both.
OdometrySetup odometry_from_json(const json& j, std::optional<std::uint64_t> seed_override);

std::string format_double(double value);
std::string sweep_csv(const std::vector<ResultRow>& rows);
json sweep_json(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

// SHA-1 of "blob <size>\0<content>", hex encoded.
std::string git_blob_hash(std::string_view content);

// Writes to path + ".tmp" and renames over path.
void atomic_write(const std::string& path, std::string_view content);

std::string iso_timestamp(std::chrono::system_clock::time_point t);

struct RunManifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::string input_hash;
  std::string output_path;
  std::string output_hash;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;

  json to_json() const;
};

std::string tool_version();

// Writes content atomically and pairs it with <path>.manifest.json.
void write_output(const std::string& path, std::string_view content, RunManifest manifest);

}  // namespace bestanp::cli
