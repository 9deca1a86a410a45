#include <benchmark/benchmark.h>

#include <vector>

#include "bestanp/error.hpp"
#include "bestanp/odometry.hpp"
#include "bestanp/random.hpp"
#include "bestanp/sonar_model.hpp"
#include "bestanp/triangulation.hpp"

namespace {

using namespace bestanp;

void BM_TriangulateTwoView(benchmark::State& state) {
  RandomStream s(5);
  Pose a;
  Pose b;
  b.rotation = so3_exp(Vec3(0, 0, deg_to_rad(20)));
  b.translation = Vec3(0.3, -0.8, 0.05);
  std::vector<TwoViewObservation> obs;
  while (obs.size() < 64) {
    const Vec3 p = a.to_world(cartesian_of({s.uniform(2, 4), deg_to_rad(s.uniform(-20, 20)),
                                            deg_to_rad(s.uniform(-8, 8))}));
    if (!in_fov(b, p, FovSpec{})) continue;
    obs.push_back({a, b, apply_noise(project_ideal(a, p).measurement, {1e-3, 1e-3}, s),
                   apply_noise(project_ideal(b, p).measurement, {1e-3, 1e-3}, s)});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(triangulate_two_view(obs[i++ % obs.size()]));
    } catch (const Error&) {
    }
  }
}
BENCHMARK(BM_TriangulateTwoView);

void BM_OdometryNoiseFree(benchmark::State& state) {
  TrajectoryParams tp;
  tp.frames = static_cast<int>(state.range(0));
  const Trajectory truth = generate_trajectory(tp);
  RandomStream scene_stream(6);
  const auto scene = generate_odometry_scene(truth, FovSpec{}, scene_stream);
  OdometryConfig cfg;
  cfg.noise = {0, 0};
  cfg.init_sigma_rot = 0;
  cfg.init_sigma_trans = 0;
  for (auto _ : state) {
    RandomStream run_stream(7);
    benchmark::DoNotOptimize(run_odometry(scene, truth, cfg, run_stream));
  }
}
BENCHMARK(BM_OdometryNoiseFree)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
