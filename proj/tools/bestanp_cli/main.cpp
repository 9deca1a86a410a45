#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "bestanp/error.hpp"
#include "bestanp_cli/commands.hpp"
#include "bestanp_cli/formats.hpp"

using namespace bestanp::cli;

namespace {

void add_noise_flags(CLI::App* cmd, NoiseFlags& flags) {
  cmd->add_option("--sigma", flags.sigma, "sets both sigma_d (m) and sigma_theta (rad)");
  cmd->add_option("--sigma-d", flags.sigma_d, "range noise std, meters");
  cmd->add_option("--sigma-theta", flags.sigma_theta, "azimuth noise std, radians");
  cmd->add_option("--mechanism", flags.mechanism, "noise on the azimuth tangent or the angle")
      ->check(CLI::IsMember({"tangent", "angle"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bestanp: forward-looking sonar pose estimation, simulation and odometry.\n"
      "Angles in all files and flags are radians; distances are meters."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", tool_version());

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed (u64)");
  app.add_option("--out", g.out, "output path; a <out>.manifest.json is written beside it");
  app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::string input;
  auto* estimate = app.add_subcommand("estimate", "estimate a pose from a correspondence file");
  estimate->add_option("input", input, "correspondence JSON")->required();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "write a synthetic correspondence file");
  simulate->add_option("--n", sim.n, "number of points")->capture_default_str();
  add_noise_flags(simulate, sim.noise);
  simulate->add_option("--max-distance", sim.fov.max_distance, "meters")->capture_default_str();
  simulate->add_option("--azimuth-halfwidth", sim.fov.azimuth_halfwidth, "radians")->capture_default_str();
  simulate->add_option("--elevation-halfwidth", sim.fov.elevation_halfwidth, "radians")->capture_default_str();

  std::string config;
  auto* sweep = app.add_subcommand("sweep", "run a Monte Carlo sweep from a JSON config");
  sweep->add_option("config", config, "sweep config JSON")->required();

  auto* odometry = app.add_subcommand("odometry", "run sonar odometry on a simulated trajectory");
  odometry->add_option("config", config, "odometry config JSON")->required();

  NoiseFlags crlb_noise;
  auto* crlb = app.add_subcommand("crlb", "Cramer-Rao bound at the truth pose of a correspondence file");
  crlb->add_option("input", input, "correspondence JSON with a truth block")->required();
  add_noise_flags(crlb, crlb_noise);

  TimingOptions timing_opts;
  auto* timing = app.add_subcommand("timing", "time the estimator over point counts");
  timing->add_option("--n", timing_opts.n_values, "point counts")->delimiter(',')->capture_default_str();
  timing->add_option("--repetitions", timing_opts.repetitions, "calls per group")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*estimate) return cmd_estimate(input, g, std::cout, std::cerr);
    if (*simulate) return cmd_simulate(sim, g, std::cout, std::cerr);
    if (*sweep) return cmd_sweep(config, g, std::cout, std::cerr);
    if (*odometry) return cmd_odometry(config, g, std::cout, std::cerr);
    if (*crlb) return cmd_crlb(input, crlb_noise, g, std::cout, std::cerr);
    if (*timing) return cmd_timing(timing_opts, g, std::cout, std::cerr);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const bestanp::Error& e) {
    std::cerr << "error (" << bestanp::to_string(e.code()) << "): " << e.what() << '\n';
    return kExitEstimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}
