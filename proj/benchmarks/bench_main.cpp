#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "earthpress/bayes.hpp"
#include "earthpress/demc.hpp"
#include "earthpress/fem.hpp"
#include "earthpress/pressure_field.hpp"
#include "earthpress/response.hpp"
#include "earthpress/scenario.hpp"

namespace earthpress {
namespace {

const Scenario& illustration() {
  static const Scenario s = load_scenario(std::string(EARTHPRESS_SCENARIO_DIR) + "/illustration.json");
  return s;
}

std::vector<double> random_knots(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 3000.0);
  std::vector<double> q(n);
  for (auto& v : q) v = u(rng);
  return q;
}

void BM_Factorize(benchmark::State& state) {
  LiningModel model = illustration().lining;
  model.element_count = static_cast<int>(state.range(0));
  model.joint_angles_deg.clear();
  for (auto _ : state) benchmark::DoNotOptimize(LiningSolver(model));
}
BENCHMARK(BM_Factorize)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
  const LiningSolver solver(illustration().lining);
  const PressureField field(random_knots(22, 1));
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(field));
}
BENCHMARK(BM_Solve)->Unit(benchmark::kMillisecond);

void BM_LinearPredict(benchmark::State& state) {
  const auto solver = std::make_shared<const LiningSolver>(illustration().lining);
  const FemResponse exact(solver, all_baselines(solver->mesh()), 0.0, 22);
  const LinearResponse linear = LinearResponse::tabulate(exact);
  const auto q = random_knots(22, 2);
  std::vector<double> out(linear.observable_count());
  for (auto _ : state) {
    linear.predict(q, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LinearPredict);

void BM_SamplerRun(benchmark::State& state) {
  // 44 chains against a 101-observable linear forward model; items are generations.
  const auto solver = std::make_shared<const LiningSolver>(illustration().lining);
  const FemResponse exact(solver, all_baselines(solver->mesh()), 0.0, 22);
  auto forward = std::make_shared<const LinearResponse>(LinearResponse::tabulate(exact));
  LikelihoodSpec spec;
  spec.forward = forward;
  const std::vector<double> truth = random_knots(22, 3);
  std::vector<double> data(forward->observable_count());
  forward->predict(truth, data);
  const BaselineSet all = all_baselines(solver->mesh());
  spec.observations.angles_deg = all.angles_deg();
  spec.observations.readings_mm.assign(data.begin(), data.end() - 1);
  spec.observations.force = ForceReading{0.0, data.back(), 0.01 * data.back()};
  const Posterior posterior(PriorSpec{}, spec);
  SamplerConfig config;
  config.iterations = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run(posterior, posterior.prior(), config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplerRun)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Summarize(benchmark::State& state) {
  SamplerConfig config;
  config.iterations = 2000;
  config.thin = 5;
  const PriorSpec prior;
  const ChainEnsemble ensemble = run(Posterior(prior), prior, config);
  std::vector<double> angles(72);
  for (std::size_t k = 0; k < angles.size(); ++k) angles[k] = 5.0 * static_cast<double>(k);
  const PressureGrid grid = illustration().summary.grid;
  for (auto _ : state) benchmark::DoNotOptimize(summarize(ensemble, angles, grid));
}
BENCHMARK(BM_Summarize)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace earthpress

BENCHMARK_MAIN();
