#include <benchmark/benchmark.h>

#include <random>

#include "sentinet/blockmat.hpp"
#include "sentinet/dynamics.hpp"
#include "sentinet/gsbl.hpp"
#include "sentinet/snma.hpp"

using namespace sentinet;

namespace {

Eigen::MatrixXd randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  }
  return m;
}

LagPair make_pair(std::uint64_t seed, Eigen::Index t, Eigen::Index n) {
  std::mt19937_64 rng(seed);
  LagPair lp;
  lp.X = randn(rng, t, n);
  lp.Y = randn(rng, t, n);
  lp.group_sizes.assign(static_cast<size_t>(n), 1);
  return lp;
}

void BM_pm_multiply(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Eigen::Index n = state.range(0);
  const ProjectiveMatrix a(randn(rng, n, n), 5);
  const ProjectiveMatrix b(randn(rng, n, n), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pm_multiply(a, b));
  }
}
BENCHMARK(BM_pm_multiply)->Arg(8)->Arg(64);

void BM_pm_inverse(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Eigen::Index n = state.range(0);
  Eigen::MatrixXd e = randn(rng, n, n);
  e += static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
  const ProjectiveMatrix a(e, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pm_inverse(a));
  }
}
BENCHMARK(BM_pm_inverse)->Arg(8)->Arg(64);

void BM_linear_posterior(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const LagPair lp = make_pair(3, 200, n);
  GroupPrior prior{Eigen::VectorXd::Ones(n), lp.group_sizes};
  for (auto _ : state) {
    benchmark::DoNotOptimize(linear_posterior(lp, prior, {1.0}));
  }
}
BENCHMARK(BM_linear_posterior)->Arg(50)->Arg(100)->Arg(200);

void BM_logistic_posterior(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  LagPair lp = make_pair(4, 200, n);
  for (Eigen::Index i = 0; i < lp.Y.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lp.Y(i, j) = lp.Y(i, j) > 0 ? 1.0 : 0.0;
    }
  }
  GroupPrior prior{Eigen::VectorXd::Ones(n), lp.group_sizes};
  const LogisticHyper hyper{Eigen::MatrixXd::Ones(lp.t_prime(), n)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(logistic_posterior(lp, prior, hyper));
  }
}
BENCHMARK(BM_logistic_posterior)->Arg(25)->Arg(50);

void BM_linear_em_iteration(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const LagPair lp = make_pair(5, 200, n);
  FitControl ctrl;
  ctrl.max_iters = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(lp, SystemKind::linear, {}, ctrl));
  }
}
BENCHMARK(BM_linear_em_iteration)->Arg(50)->Arg(100)->Arg(200)
    ->Unit(benchmark::kMillisecond);

void BM_selection(benchmark::State& state) {
  SyntheticConfig gen;
  gen.n_components = state.range(0);
  gen.n_sentinels = 3;
  gen.t_rows = 4 * gen.n_components;
  gen.snr_db = 20.0;
  gen.seed = 6;
  const auto [d, truth] = generate_synthetic(gen);
  SnmaConfig cfg;
  cfg.k = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_snma(d, cfg));
  }
}
BENCHMARK(BM_selection)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
