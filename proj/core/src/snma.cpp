#include "sentinet/snma.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

namespace sentinet {

namespace {

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& m, Eigen::Index at,
                             Eigen::Index count) {
  Eigen::MatrixXd out(m.rows(), m.cols() - count);
  out.leftCols(at) = m.leftCols(at);
  out.rightCols(m.cols() - at - count) = m.rightCols(m.cols() - at - count);
  return out;
}

Eigen::MatrixXd drop_rows(const Eigen::MatrixXd& m, Eigen::Index at,
                          Eigen::Index count) {
  Eigen::MatrixXd out(m.rows() - count, m.cols());
  out.topRows(at) = m.topRows(at);
  out.bottomRows(m.rows() - at - count) = m.bottomRows(m.rows() - at - count);
  return out;
}

Eigen::VectorXd drop_entry(const Eigen::VectorXd& v, Eigen::Index at) {
  Eigen::VectorXd out(v.size() - 1);
  out.head(at) = v.head(at);
  out.tail(v.size() - at - 1) = v.tail(v.size() - at - 1);
  return out;
}

Eigen::Index group_offset(const std::vector<Eigen::Index>& sizes,
                          Eigen::Index pos) {
  Eigen::Index off = 0;
  for (Eigen::Index g = 0; g < pos; ++g) off += sizes[static_cast<size_t>(g)];
  return off;
}

}  // namespace

EliminationState prune_group(const EliminationState& state, Eigen::Index pos) {
  const auto n_live = state.n_live();
  if (pos < 0 || pos >= n_live) {
    throw IndexOutOfRange("prune position " + std::to_string(pos) +
                          " outside live range [0, " + std::to_string(n_live) +
                          ")");
  }
  if (n_live <= 1) {
    throw IndexOutOfRange("cannot prune the last remaining group");
  }
  const Eigen::Index w = state.lp.group_sizes[static_cast<size_t>(pos)];
  const Eigen::Index off = group_offset(state.lp.group_sizes, pos);

  EliminationState out;
  out.kind = state.kind;
  out.lambda = state.lambda;
  out.xi = state.xi;
  out.lp.Y = state.lp.Y;
  out.lp.X = drop_columns(state.lp.X, off, w);
  out.lp.group_sizes = state.lp.group_sizes;
  out.lp.group_sizes.erase(out.lp.group_sizes.begin() + pos);
  out.live = state.live;
  out.live.erase(out.live.begin() + pos);
  out.gamma = drop_entry(state.gamma, pos);
  if (state.M.size() > 0) {
    out.M = drop_rows(state.M, off, w);
  }
  out.sigma.reserve(state.sigma.size());
  for (const auto& sigma : state.sigma) {
    out.sigma.push_back(drop_rows(drop_columns(sigma, off, w), off, w));
  }
  return out;
}

namespace {

SelectionResult materialize(const EliminationState& state,
                            const FitResult& fitted,
                            const std::vector<Eigen::Index>& removed,
                            std::vector<RoundRecord> rounds) {
  SelectionResult sel;
  sel.kind = state.kind;

  // Survivors in ascending component order, with γ re-aligned to match.
  std::vector<Eigen::Index> order(state.live.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return state.live[static_cast<size_t>(a)] < state.live[static_cast<size_t>(b)];
  });

  sel.sentinels.reserve(order.size());
  sel.gamma_final.resize(static_cast<Eigen::Index>(order.size()));
  for (size_t i = 0; i < order.size(); ++i) {
    sel.sentinels.push_back(state.live[static_cast<size_t>(order[i])]);
    sel.gamma_final(static_cast<Eigen::Index>(i)) =
        fitted.prior.gamma(order[i]);
  }
  sel.priority_order = removed;
  sel.priority_order.insert(sel.priority_order.end(), sel.sentinels.begin(),
                            sel.sentinels.end());
  sel.posterior_final = fitted.posterior;
  sel.prior_final = fitted.prior;
  sel.linear_final = fitted.linear;
  sel.logistic_final = fitted.logistic;
  sel.rounds = std::move(rounds);
  if (!sel.rounds.empty()) {
    sel.rounds.back().removed_component = -1;
  }
  return sel;
}

}  // namespace

std::map<Eigen::Index, SelectionResult> run_snma_path(
    const LagPair& lp, const SnmaConfig& cfg,
    const std::vector<Eigen::Index>& ks) {
  const Eigen::Index n = lp.n_targets();
  if (ks.empty()) {
    throw BadConfig("at least one target size is required");
  }
  std::set<Eigen::Index> targets(ks.begin(), ks.end());
  for (auto k : targets) {
    if (k < 1 || k > n) {
      throw BadConfig("target sentinel count " + std::to_string(k) +
                      " outside [1, " + std::to_string(n) + "]");
    }
  }
  const Eigen::Index k_min = *targets.begin();

  EliminationState state;
  state.kind = cfg.kind;
  state.lp = lp;
  state.live.resize(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) state.live[static_cast<size_t>(i)] = i;

  bool first_round = true;
  std::vector<Eigen::Index> removed;
  std::vector<RoundRecord> rounds;
  std::map<Eigen::Index, SelectionResult> results;

  for (Eigen::Index size = n; size >= k_min; --size) {
    FitInit init;
    if (first_round) {
      if (cfg.random_init) {
        init.random_seed = cfg.seed;
      }
      first_round = false;
    } else if (cfg.carry_hyper) {
      init.gamma = state.gamma;
      if (cfg.kind == SystemKind::linear) {
        init.lambda = state.lambda;
      } else {
        init.xi = state.xi;
      }
    }
    const auto round_start = std::chrono::steady_clock::now();
    FitResult fitted = fit(state.lp, cfg.kind, init, cfg.fit);
    const auto round_end = std::chrono::steady_clock::now();
    state.gamma = fitted.prior.gamma;
    state.lambda = fitted.linear.lambda;
    state.xi = fitted.logistic.xi;
    state.M = fitted.posterior.M;
    state.sigma = fitted.posterior.sigma;

    RoundRecord round;
    round.live = state.live;
    round.gamma = state.gamma;
    round.converged = fitted.trace.converged;
    round.iterations = fitted.trace.iterations;
    round.wall_ms = std::chrono::duration<double, std::milli>(round_end -
                                                              round_start)
                        .count();

    if (targets.count(size) > 0) {
      auto snapshot_rounds = rounds;
      snapshot_rounds.push_back(round);
      results.emplace(size,
                      materialize(state, fitted, removed, snapshot_rounds));
    }
    if (size == k_min) {
      break;
    }

    // Minimum-γ group; ties resolve to the lowest original component id,
    // which is the earliest live position since ids stay sorted.
    Eigen::Index min_pos = 0;
    for (Eigen::Index g = 1; g < state.n_live(); ++g) {
      if (state.gamma(g) < state.gamma(min_pos)) {
        min_pos = g;
      }
    }
    round.removed_component = state.live[static_cast<size_t>(min_pos)];
    removed.push_back(round.removed_component);
    rounds.push_back(std::move(round));
    state = prune_group(state, min_pos);
  }
  return results;
}

std::map<Eigen::Index, SelectionResult> run_snma_path(
    const DynamicsMatrix& d, const SnmaConfig& cfg,
    const std::vector<Eigen::Index>& ks) {
  BasisSet basis_store;
  const BasisSet* basis = nullptr;
  if (!cfg.basis_names.empty()) {
    basis_store = make_basis(cfg.basis_names);
    basis = &basis_store;
  }
  return run_snma_path(make_lag_pair(d, basis), cfg, ks);
}

SelectionResult run_snma(const DynamicsMatrix& d, const SnmaConfig& cfg) {
  auto all = run_snma_path(d, cfg, {cfg.k});
  return std::move(all.at(cfg.k));
}

}  // namespace sentinet
