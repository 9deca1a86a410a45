#include <benchmark/benchmark.h>

#include "bestanp/estimator.hpp"
#include "bestanp/harness.hpp"
#include "bestanp/random.hpp"
#include "bestanp/sonar_model.hpp"

namespace {

using namespace bestanp;

struct Problem {
  Pose truth;
  CorrespondenceSet corr;
};

Problem make_problem(int n, std::uint64_t seed) {
  RandomStream s(seed);
  Problem p;
  p.truth = sample_pose(s);
  p.corr.world_points = generate_scene(n, FovSpec{}, p.truth, s);
  for (const Vec3& w : p.corr.world_points) {
    p.corr.measurements.push_back(apply_noise(project_ideal(p.truth, w).measurement,
                                              {1e-3, 1e-3}, s));
  }
  return p;
}

void BM_Bestanp(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bestanp::bestanp(p.corr));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Bestanp)->Arg(10)->Arg(30)->Arg(90)->Arg(270)->Arg(1000)->Arg(10000)
    ->Complexity(benchmark::oN);

void BM_EstimateTranslation(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_translation(p.corr));
  }
}
BENCHMARK(BM_EstimateTranslation)->Arg(10)->Arg(1000);

void BM_GnStep(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gn_refine(p.corr, p.truth, 1e-3, 1e-3, 1));
  }
}
BENCHMARK(BM_GnStep)->Arg(10)->Arg(1000);

void BM_Crlb(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_crlb(p.corr.world_points, p.truth, 1e-3, 1e-3));
  }
}
BENCHMARK(BM_Crlb)->Arg(14)->Arg(1000);

}  // namespace
