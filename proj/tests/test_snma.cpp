#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "sentinet/dynamics.hpp"
#include "sentinet/predict.hpp"
#include "sentinet/snma.hpp"

using namespace sentinet;

namespace {

// Roll x_{t+1} = x_t · S from x0 and return the T×N panel.
DynamicsMatrix roll_linear(const Eigen::MatrixXd& s,
                           const Eigen::RowVectorXd& x0, Eigen::Index t_rows) {
  DynamicsMatrix d;
  d.values.resize(t_rows, x0.cols());
  d.values.row(0) = x0;
  for (Eigen::Index t = 1; t < t_rows; ++t) {
    d.values.row(t) = d.values.row(t - 1) * s;
  }
  return d;
}

std::vector<Eigen::Index> iota_ids(Eigen::Index n) {
  std::vector<Eigen::Index> v(static_cast<size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("k = N degenerates to a single fit") {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> nd;
  DynamicsMatrix d;
  d.values.resize(30, 4);
  for (Eigen::Index t = 0; t < 30; ++t) {
    for (Eigen::Index j = 0; j < 4; ++j) d.values(t, j) = nd(rng);
  }
  SnmaConfig cfg;
  cfg.k = 4;
  const SelectionResult res = run_snma(d, cfg);

  CHECK(res.sentinels == iota_ids(4));
  CHECK(res.priority_order == iota_ids(4));
  REQUIRE(res.rounds.size() == 1);
  CHECK(res.rounds.front().removed_component == -1);

  const LagPair lp = make_lag_pair(d);
  const FitResult direct = fit(lp, SystemKind::linear, {}, {});
  CHECK(res.gamma_final == direct.prior.gamma);
  CHECK(res.posterior_final.M == direct.posterior.M);
  CHECK(res.linear_final.lambda == direct.linear.lambda);
}

TEST_CASE("single influential row is found and certified by exhaustive fits") {
  // Only component 2 drives the next state; a generic first row keeps the
  // other columns from being scaled copies of it.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(5, 5);
  s.row(2) << 0.3, -0.4, 0.9, 0.2, -0.1;
  Eigen::RowVectorXd x0(5);
  x0 << 0.5, -0.3, 0.8, 0.1, -0.6;
  const DynamicsMatrix d = roll_linear(s, x0, 40);

  SnmaConfig cfg;
  cfg.k = 1;
  const SelectionResult res = run_snma(d, cfg);
  REQUIRE(res.sentinels.size() == 1);
  CHECK(res.sentinels[0] == 2);

  // Independent certificate: least-squares one-step error of every
  // single-component predictor. Only component 2 can be exact.
  const LagPair lp = make_lag_pair(d);
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Eigen::VectorXd u = lp.X.col(j);
    const Eigen::RowVectorXd w = (u.transpose() * lp.Y) / u.squaredNorm();
    const double err = rmse(lp.Y, u * w);
    if (j == 2) {
      CHECK(err < 1e-10);
    } else {
      CHECK(err > 1e-4);
    }
  }
}

TEST_CASE("planted sentinels recovered across seeds at high snr") {
  int clean = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    SyntheticConfig gen;
    gen.n_components = 10;
    gen.n_sentinels = 3;
    gen.t_rows = 200;
    gen.kind = SystemKind::linear;
    gen.snr_db = 30.0;
    gen.var_small = 1e-4;  // keep the unplanted rows out of the signal band
    gen.seed = seed;
    const auto [d, truth] = generate_synthetic(gen);

    SnmaConfig cfg;
    cfg.k = 3;
    const SelectionResult res = run_snma(d, cfg);
    if (failure_rate(truth.sentinels, res.sentinels) == 0.0) ++clean;
  }
  CHECK(clean >= 9);
}

TEST_CASE("prune_group drops exactly one group's slices") {
  // Widths {1,2,1}: columns [0 | 1 2 | 3].
  EliminationState state;
  state.lp.X.resize(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) state.lp.X(i, j) = 10.0 * i + j;
  }
  state.lp.Y = Eigen::MatrixXd::Ones(6, 3);
  state.lp.group_sizes = {1, 2, 1};
  state.live = {0, 1, 2};
  state.gamma.resize(3);
  state.gamma << 0.5, 0.6, 0.7;
  state.lambda = 0.9;
  state.M.resize(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) state.M(i, j) = 100.0 * i + j;
  }
  state.sigma = {Eigen::MatrixXd::Identity(4, 4) * 2.0};

  const EliminationState next = prune_group(state, 1);
  CHECK(next.live == std::vector<Eigen::Index>{0, 2});
  CHECK(next.lp.group_sizes == std::vector<Eigen::Index>{1, 1});
  CHECK(next.lp.X.cols() == 2);
  CHECK(next.lp.X.col(0) == state.lp.X.col(0));
  CHECK(next.lp.X.col(1) == state.lp.X.col(3));
  CHECK(next.lp.Y == state.lp.Y);
  REQUIRE(next.gamma.size() == 2);
  CHECK(next.gamma(0) == 0.5);
  CHECK(next.gamma(1) == 0.7);
  CHECK(next.lambda == 0.9);
  REQUIRE(next.M.rows() == 2);
  CHECK(next.M.row(0) == state.M.row(0));
  CHECK(next.M.row(1) == state.M.row(3));
  REQUIRE(next.sigma.size() == 1);
  CHECK(next.sigma[0] == Eigen::MatrixXd::Identity(2, 2) * 2.0);

  CHECK_THROWS_AS(static_cast<void>(prune_group(state, -1)), IndexOutOfRange);
  CHECK_THROWS_AS(static_cast<void>(prune_group(state, 3)), IndexOutOfRange);

  EliminationState lone = next;
  lone = prune_group(lone, 0);
  CHECK_THROWS_AS(static_cast<void>(prune_group(lone, 0)), IndexOutOfRange);
}

TEST_CASE("elimination rounds shrink by one and nest") {
  SyntheticConfig gen;
  gen.n_components = 6;
  gen.n_sentinels = 2;
  gen.t_rows = 120;
  gen.snr_db = 20.0;
  gen.seed = 7;
  const auto [d, truth] = generate_synthetic(gen);

  SnmaConfig cfg;
  cfg.k = 2;
  const SelectionResult res = run_snma(d, cfg);
  REQUIRE(res.rounds.size() == 5);  // four removals + final fit
  for (size_t r = 0; r < res.rounds.size(); ++r) {
    const RoundRecord& round = res.rounds[r];
    CHECK(round.live.size() == 6 - r);
    CHECK(round.gamma.size() == static_cast<Eigen::Index>(round.live.size()));
    CHECK(std::is_sorted(round.live.begin(), round.live.end()));
    if (r + 1 < res.rounds.size()) {
      // Removed id is live here and absent from the next round.
      const auto& nxt = res.rounds[r + 1].live;
      CHECK(std::count(round.live.begin(), round.live.end(),
                       round.removed_component) == 1);
      CHECK(std::count(nxt.begin(), nxt.end(), round.removed_component) == 0);
      for (auto id : nxt) {
        CHECK(std::count(round.live.begin(), round.live.end(), id) == 1);
      }
    } else {
      CHECK(round.removed_component == -1);
      CHECK(round.live == res.sentinels);
    }
  }

  // priority_order = removal order then survivors, a permutation of 0..N-1.
  REQUIRE(res.priority_order.size() == 6);
  for (size_t r = 0; r + 1 < res.rounds.size(); ++r) {
    CHECK(res.priority_order[r] == res.rounds[r].removed_component);
  }
  CHECK(std::vector<Eigen::Index>(res.priority_order.end() - 2,
                                  res.priority_order.end()) == res.sentinels);
  std::vector<Eigen::Index> sorted_prio = res.priority_order;
  std::sort(sorted_prio.begin(), sorted_prio.end());
  CHECK(sorted_prio == iota_ids(6));
}

TEST_CASE("exact gamma ties break toward the lowest component id") {
  // An all-zero predictor column contributes nothing to the precision matrix,
  // so its γ reproduces itself exactly each iteration: two such columns stay
  // tied bit-for-bit at the γ = 1 init. Strong live predictors sit above 1,
  // making the tie the minimum; removal order must then follow component id.
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  LagPair lp;
  lp.X = Eigen::MatrixXd::Zero(60, 4);
  lp.Y.resize(60, 4);
  for (Eigen::Index t = 0; t < 60; ++t) {
    lp.X(t, 2) = nd(rng);
    lp.X(t, 3) = nd(rng);
  }
  Eigen::RowVectorXd w2(4), w3(4);
  for (Eigen::Index j = 0; j < 4; ++j) {
    w2(j) = 2.0 + 0.3 * nd(rng);
    w3(j) = -2.0 + 0.3 * nd(rng);
  }
  lp.Y = lp.X.col(2) * w2 + lp.X.col(3) * w3;
  for (Eigen::Index t = 0; t < 60; ++t) {
    for (Eigen::Index j = 0; j < 4; ++j) lp.Y(t, j) += 0.01 * nd(rng);
  }
  lp.group_sizes = {1, 1, 1, 1};

  SnmaConfig cfg;
  const auto path = run_snma_path(lp, cfg, {2});
  const SelectionResult& res = path.at(2);
  REQUIRE(res.rounds.size() == 3);
  const RoundRecord& first = res.rounds.front();
  // Both dead groups are frozen at the exact init value.
  CHECK(first.gamma(0) == 1.0);
  CHECK(first.gamma(1) == 1.0);
  CHECK(first.gamma(2) > 1.0);
  CHECK(first.gamma(3) > 1.0);
  CHECK(first.removed_component == 0);
  CHECK(res.rounds[1].removed_component == 1);
  CHECK(res.sentinels == std::vector<Eigen::Index>{2, 3});
}

TEST_CASE("sentinel set is stable under component relabeling") {
  SyntheticConfig gen;
  gen.n_components = 6;
  gen.n_sentinels = 2;
  gen.t_rows = 150;
  gen.snr_db = 30.0;
  gen.var_small = 1e-4;
  gen.seed = 14;
  const auto [d, truth] = generate_synthetic(gen);

  // new column j = old column perm[j]
  const std::vector<Eigen::Index> perm = {4, 2, 0, 5, 1, 3};
  DynamicsMatrix shuffled = d;
  for (Eigen::Index j = 0; j < 6; ++j) {
    shuffled.values.col(j) = d.values.col(perm[static_cast<size_t>(j)]);
  }

  SnmaConfig cfg;
  cfg.k = 2;
  const SelectionResult base = run_snma(d, cfg);
  const SelectionResult moved = run_snma(shuffled, cfg);

  std::set<Eigen::Index> mapped;  // pull back to original labels
  for (auto id : moved.sentinels) {
    mapped.insert(perm[static_cast<size_t>(id)]);
  }
  CHECK(mapped == std::set<Eigen::Index>(base.sentinels.begin(),
                                         base.sentinels.end()));
  CHECK(failure_rate(truth.sentinels, base.sentinels) == 0.0);
}

TEST_CASE("shared elimination pass equals independent runs at each size") {
  SyntheticConfig gen;
  gen.n_components = 7;
  gen.n_sentinels = 2;
  gen.t_rows = 140;
  gen.snr_db = 20.0;
  gen.seed = 17;
  const auto [d, truth] = generate_synthetic(gen);

  SnmaConfig cfg;
  const auto path = run_snma_path(d, cfg, {2, 4, 6});
  REQUIRE(path.size() == 3);
  for (const Eigen::Index k : {2, 4, 6}) {
    SnmaConfig one = cfg;
    one.k = k;
    const SelectionResult solo = run_snma(d, one);
    const SelectionResult& shared = path.at(k);
    CHECK(shared.sentinels == solo.sentinels);
    CHECK(shared.priority_order == solo.priority_order);
    CHECK(shared.gamma_final == solo.gamma_final);
    CHECK(shared.posterior_final.M == solo.posterior_final.M);
    CHECK(shared.rounds.size() == solo.rounds.size());
  }
}

TEST_CASE("cold hyperparameter restarts reach the same easy selection") {
  SyntheticConfig gen;
  gen.n_components = 6;
  gen.n_sentinels = 2;
  gen.t_rows = 150;
  gen.snr_db = 30.0;
  gen.seed = 19;
  const auto [d, truth] = generate_synthetic(gen);

  SnmaConfig warm;
  warm.k = 2;
  SnmaConfig cold = warm;
  cold.carry_hyper = false;
  const SelectionResult a = run_snma(d, warm);
  const SelectionResult b = run_snma(d, cold);
  CHECK(a.sentinels == b.sentinels);
  CHECK(failure_rate(truth.sentinels, a.sentinels) == 0.0);
  for (const auto& round : b.rounds) CHECK(round.converged);
}

TEST_CASE("target size outside [1, N] is rejected") {
  DynamicsMatrix d;
  d.values = Eigen::MatrixXd::Random(20, 3);
  SnmaConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(static_cast<void>(run_snma(d, cfg)), BadConfig);
  cfg.k = 4;
  CHECK_THROWS_AS(static_cast<void>(run_snma(d, cfg)), BadConfig);
  CHECK_THROWS_AS(static_cast<void>(run_snma_path(d, cfg, {})), BadConfig);
}

TEST_CASE("seeded random initialization stays deterministic") {
  SyntheticConfig gen;
  gen.n_components = 5;
  gen.n_sentinels = 2;
  gen.t_rows = 100;
  gen.snr_db = 25.0;
  gen.seed = 23;
  const auto [d, truth] = generate_synthetic(gen);

  SnmaConfig cfg;
  cfg.k = 2;
  cfg.random_init = true;
  cfg.seed = 77;
  const SelectionResult a = run_snma(d, cfg);
  const SelectionResult b = run_snma(d, cfg);
  CHECK(a.sentinels == b.sentinels);
  CHECK(a.gamma_final == b.gamma_final);
  CHECK(a.posterior_final.M == b.posterior_final.M);
}
