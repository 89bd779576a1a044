#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "sentinet/dynamics.hpp"
#include "sentinet/errors.hpp"

namespace sentinet {

inline constexpr double kGammaFloor = 1e-10;
inline constexpr double kLambdaFloor = 1e-12;

// Per-group prior variances. Group i's predictor coefficients share the
// zero-mean Gaussian prior with variance gamma[i].
struct GroupPrior {
  Eigen::VectorXd gamma;                  // one entry per live group, ≥ floor
  std::vector<Eigen::Index> group_sizes;  // widths, summing to p
};

// Posterior over the influence matrix, kept in the reduced p×N / p×p
// coordinates. Column j of M is the posterior mean of the predictors for
// target j. The linear posterior shares one p×p covariance across targets;
// the logistic one decouples into N per-target blocks.
struct Posterior {
  SystemKind kind{SystemKind::linear};
  Eigen::MatrixXd M;                   // p×N
  std::vector<Eigen::MatrixXd> sigma;  // size 1 (linear) or N (logistic)

  const Eigen::MatrixXd& shared_sigma() const { return sigma.front(); }
  const Eigen::MatrixXd& sigma_for(Eigen::Index j) const {
    return sigma.size() == 1 ? sigma.front() : sigma[static_cast<size_t>(j)];
  }
};

struct LinearHyper {
  double lambda{1.0};  // observation noise variance
};

struct LogisticHyper {
  Eigen::MatrixXd xi;  // T'×N variational parameters, ≥ 0
};

double sigmoid(double z);

// Curvature weight of the quadratic lower bound on log σ:
// tanh(ξ/2)/(4ξ), continued to 1/8 at ξ = 0.
double jj_lambda(double xi);

// Value of the quadratic lower bound on the Bernoulli likelihood
// p(y | activation z) at variational parameter ξ. Equals the likelihood
// exactly at ξ = |z|.
double variational_bound(double z, bool y, double xi);
double bernoulli_likelihood(double z, bool y);

Posterior linear_posterior(const LagPair& lp, const GroupPrior& prior,
                           const LinearHyper& hyper);
Posterior logistic_posterior(const LagPair& lp, const GroupPrior& prior,
                             const LogisticHyper& hyper);

// EM update of the per-group prior variances from the current posterior:
// γ_i = (Σ_j ‖M_ij‖² + Σ_j tr Σ_j[group i]) / (N · width_i), floored.
Eigen::VectorXd update_gamma(const Posterior& post,
                             const std::vector<Eigen::Index>& group_sizes);

// EM update of the linear noise variance:
// λ = (‖Y − XM‖_F² + N·tr(Σ XᵀX)) / (T'N).
double update_lambda(const LagPair& lp, const Posterior& post);

// Variational update ξ_{t,j} = sqrt(x_t (Σ_j + m_j m_jᵀ) x_tᵀ).
Eigen::MatrixXd update_xi(const LagPair& lp, const Posterior& post);

// Exact log evidence of the linear model, summed over target columns.
// Routes through the T'×T' or p×p determinant identity, whichever is
// smaller; T' = 0 gives 0.
double marginal_log_likelihood(const LagPair& lp, const GroupPrior& prior,
                               const LinearHyper& hyper);

struct FitControl {
  int max_iters{200};
  double tol{1e-4};  // on max relative γ change
};

// Optional warm start / explicit initialization. Unset fields use the
// deterministic defaults (γ = 1, λ = var(Y) clamped to ≥ 1e-6, ξ = 1);
// random_seed switches to seeded random initialization instead.
struct FitInit {
  std::optional<Eigen::VectorXd> gamma;
  std::optional<double> lambda;
  std::optional<Eigen::MatrixXd> xi;
  std::optional<std::uint64_t> random_seed;
};

struct FitIterate {
  Eigen::VectorXd gamma;
  double lambda{0.0};   // linear only
  double xi_mean{0.0};  // logistic only
  double mll{0.0};      // linear only; NaN for logistic
};

struct FitTrace {
  std::vector<FitIterate> iterates;  // entry per iteration plus final state
  int iterations{0};
  bool converged{false};
};

struct FitResult {
  Posterior posterior;
  GroupPrior prior;
  LinearHyper linear;      // meaningful when kind == linear
  LogisticHyper logistic;  // meaningful when kind == logistic
  FitTrace trace;
};

// Alternate posterior evaluation with hyperparameter updates until the γ
// vector stabilizes (relative tol) or max_iters is hit. Non-convergence is
// reported through trace.converged, never thrown.
FitResult fit(const LagPair& lp, SystemKind kind, const FitInit& init,
              const FitControl& ctrl);

}  // namespace sentinet
