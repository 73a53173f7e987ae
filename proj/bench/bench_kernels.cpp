// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include "planfactory/selector.hpp"

using namespace planfactory;

namespace {

const KinematicChain& chain() {
  static const auto c = KinematicChain::load(std::string(PLANFACTORY_DATA_DIR) + "/panda.chain");
  return c;
}

const SphereModel& model() {
  static const auto m = SphereModel::load(std::string(PLANFACTORY_DATA_DIR) + "/panda.spheres");
  return m;
}

std::vector<Vec3> cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i)
    pts.emplace_back(uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8), uniform(rng, 0.0, 1.2));
  return pts;
}

std::vector<kernels::SphereSet> sphere_sets(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const RobotBody body(chain(), model());
  std::vector<kernels::SphereSet> sets;
  for (std::size_t i = 0; i < n; ++i) sets.push_back(body.spheres(chain().sample_uniform(rng)));
  return sets;
}

std::vector<Trajectory> candidates(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const JointConfig q0 = chain().rest();
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<JointConfig> deltas(49, JointConfig::Zero(static_cast<Eigen::Index>(chain().dof())));
    for (auto& d : deltas)
      for (Eigen::Index j = 0; j < d.size(); ++j) d[j] = uniform(rng, -0.05, 0.05);
    out.push_back(predict_rollout(q0, deltas));
  }
  return out;
}

void BM_sdf_batch_serial(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto spheres = sphere_sets(1, 2).front();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::sdf_batch(spheres, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_sdf_batch_parallel(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto spheres = sphere_sets(1, 2).front();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::sdf_batch(spheres, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_count_sets_serial(benchmark::State& state) {
  const auto pts = cloud(4096, 3);
  const auto sets = sphere_sets(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::count_violations_sets(sets, pts, 0.01));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_count_sets_parallel(benchmark::State& state) {
  const auto pts = cloud(4096, 3);
  const SpatialHash index(pts, 0.05);
  const auto sets = sphere_sets(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::count_violations_sets(sets, pts, index, 0.01));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_select_serial(benchmark::State& state) {
  const auto cands = candidates(64, 5);
  PointCloud pc;
  for (const auto& p : cloud(4096, 6)) pc.push_back(p, PointLabel::obstacle);
  const ScoringScene scene(pc);
  const RobotBody body(chain(), model());
  for (auto _ : state) benchmark::DoNotOptimize(select_best_serial(cands, body, scene));
}

void BM_select_parallel(benchmark::State& state) {
  const auto cands = candidates(64, 5);
  PointCloud pc;
  for (const auto& p : cloud(4096, 6)) pc.push_back(p, PointLabel::obstacle);
  const ScoringScene scene(pc);
  const RobotBody body(chain(), model());
  for (auto _ : state) benchmark::DoNotOptimize(select_best(cands, body, scene));
}

}  // namespace

BENCHMARK(BM_sdf_batch_serial)->Arg(4096)->Arg(65536);
BENCHMARK(BM_sdf_batch_parallel)->Arg(4096)->Arg(65536);
BENCHMARK(BM_count_sets_serial)->Arg(50)->Arg(3200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_count_sets_parallel)->Arg(50)->Arg(3200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_select_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_select_parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
