#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bestanp/sonar_model.hpp"

namespace bestanp::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitEstimator = 3,
  kExitSweepExhausted = 4,
  kExitTrackingLost = 5,
};

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;     // empty: primary output goes to stdout
  std::string format;  // "csv", "json" or empty for the command default
};

// Noise flags shared by simulate and crlb. A set `sigma` fills both components
// before the specific ones apply.
struct NoiseFlags {
  std::optional<double> sigma;
  std::optional<double> sigma_d;
  std::optional<double> sigma_theta;
  std::string mechanism = "tangent";

  NoiseModel resolve(NoiseModel base) const;
};

struct SimulateOptions {
  int n = 14;
  NoiseFlags noise;
  FovSpec fov;
};

struct TimingOptions {
  std::vector<int> n_values{10, 30, 90, 270, 1000};
  int repetitions = 100;
};

int cmd_estimate(const std::string& input, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err);
int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err);
int cmd_sweep(const std::string& config, const GlobalOptions& g, std::ostream& out,
              std::ostream& err);
int cmd_odometry(const std::string& config, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err);
int cmd_crlb(const std::string& input, const NoiseFlags& noise, const GlobalOptions& g,
             std::ostream& out, std::ostream& err);
int cmd_timing(const TimingOptions& o, const GlobalOptions& g, std::ostream& out,
               std::ostream& err);

}  // namespace bestanp::cli
