// Serial reference vs OpenMP kernels: batch gradient and study fan-out.
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "shm/config.hpp"
#include "shm/mlp.hpp"
#include "shm/parallel.hpp"
#include "shm/predictor.hpp"
#include "shm/study.hpp"

namespace {

struct GradFixture {
  shm::nn::Network net = shm::nn::init_network({9, 25, 25, 1}, 1);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<int> rows;

  explicit GradFixture(int n) : x(n, 9), y(n), rows(n) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 9; ++j) x(i, j) = g(rng);
      y(i) = g(rng);
    }
    std::iota(rows.begin(), rows.end(), 0);
  }
};

void BM_GradientSerial(benchmark::State& state) {
  GradFixture f(static_cast<int>(state.range(0)));
  const shm::sysid::SquaredError loss(f.y);
  for (auto _ : state) benchmark::DoNotOptimize(shm::nn::batch_gradient_serial(f.net, f.x, f.rows, loss));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GradientParallel(benchmark::State& state) {
  GradFixture f(static_cast<int>(state.range(0)));
  const shm::sysid::SquaredError loss(f.y);
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(shm::nn::batch_gradient(f.net, f.x, f.rows, loss, workers));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

shm::cfg::RunConfig pluck_config() {
  shm::cfg::RunConfig c;
  c.master_seed = 1;
  c.beam.damping_ratio = 0.0;
  c.excitations = {shm::sim::ExcitationSpec{.kind = shm::sim::ExcitationKind::Pluck}};
  c.sampling.duration_s = 5.0;
  return c;
}

void BM_StudyIdentified(benchmark::State& state) {
  const auto c = pluck_config();
  shm::study::StudyOptions o;
  o.pathway = shm::dmg::Pathway::Identified;
  o.train = false;
  o.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(shm::study::run_study(c, 1, o));
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Arg(4096);
BENCHMARK(BM_GradientParallel)->Args({4096, 1})->Args({4096, 2})->Args({4096, 4});
BENCHMARK(BM_StudyIdentified)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
