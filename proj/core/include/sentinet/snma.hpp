#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "sentinet/dynamics.hpp"
#include "sentinet/gsbl.hpp"

namespace sentinet {

struct SnmaConfig {
  Eigen::Index k{1};
  SystemKind kind{SystemKind::linear};
  FitControl fit{};
  std::vector<std::string> basis_names;  // model-side embedding
  std::uint64_t seed{0};
  bool random_init{false};   // seeded random hyperparameter init
  bool carry_hyper{true};    // warm-start hyperparameters across prunes
};

// Mutable elimination state: the design matrix restricted to live groups
// plus the hyperparameters and posterior carried between rounds.
struct EliminationState {
  LagPair lp;                            // X holds live columns; Y fixed
  std::vector<Eigen::Index> live;        // original component id per group
  Eigen::VectorXd gamma;
  double lambda{1.0};
  Eigen::MatrixXd xi;                    // T'×N
  Eigen::MatrixXd M;                     // posterior mean over live groups
  std::vector<Eigen::MatrixXd> sigma;    // posterior covariance block(s)
  SystemKind kind{SystemKind::linear};

  Eigen::Index n_live() const {
    return static_cast<Eigen::Index>(live.size());
  }
};

// Remove live group `pos` (position in the live list): drops its X columns,
// γ entry, M row-block and Σ row/column blocks. ξ and λ are untouched.
// Throws IndexOutOfRange for a bad position or when only one group is left.
EliminationState prune_group(const EliminationState& state, Eigen::Index pos);

struct RoundRecord {
  Eigen::Index removed_component{-1};  // original id; -1 for the final fit
  std::vector<Eigen::Index> live;      // ids at this round, pre-removal
  Eigen::VectorXd gamma;               // converged γ over `live`
  bool converged{false};
  int iterations{0};
  double wall_ms{0.0};                 // fit wall time for this round
};

struct SelectionResult {
  SystemKind kind{SystemKind::linear};
  std::vector<Eigen::Index> sentinels;  // k survivors, ascending
  // All N component ids ordered by elimination round (first removed first),
  // survivors appended last in ascending order. Later position = higher
  // monitoring priority.
  std::vector<Eigen::Index> priority_order;
  Eigen::VectorXd gamma_final;          // aligned with `sentinels`
  Posterior posterior_final;            // restricted to survivors
  GroupPrior prior_final;
  LinearHyper linear_final;
  LogisticHyper logistic_final;
  std::vector<RoundRecord> rounds;
};

// Backward elimination: fit to convergence, remove the minimum-γ group
// (ties to the lowest original id), repeat until k groups remain, then fit
// once more on the survivors. Deterministic given cfg.
SelectionResult run_snma(const DynamicsMatrix& d, const SnmaConfig& cfg);

// One elimination pass materializing a SelectionResult at every requested
// size. Backward elimination nests: the state at size k equals the state of
// a run targeting k, so a shared pass is exactly equivalent to independent
// runs and much cheaper for budget sweeps.
std::map<Eigen::Index, SelectionResult> run_snma_path(
    const DynamicsMatrix& d, const SnmaConfig& cfg,
    const std::vector<Eigen::Index>& ks);

// Same pass over a prebuilt design (already embedded; cfg.basis_names is
// ignored). Lets callers pool training segments before selection.
std::map<Eigen::Index, SelectionResult> run_snma_path(
    const LagPair& lp, const SnmaConfig& cfg,
    const std::vector<Eigen::Index>& ks);

}  // namespace sentinet
