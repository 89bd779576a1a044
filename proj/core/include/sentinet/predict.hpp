#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sentinet/dynamics.hpp"
#include "sentinet/gsbl.hpp"

namespace sentinet {

// Embedded feature values of the monitored components at one time step.
struct SurveillanceRow {
  Eigen::RowVectorXd values;            // length k·m
  std::vector<Eigen::Index> sentinels;  // original component ids, ascending
};

struct PredictiveOutput {
  SystemKind kind{SystemKind::linear};
  Eigen::VectorXd mean;         // per target (linear)
  Eigen::VectorXd variance;     // per target (linear)
  Eigen::VectorXd probability;  // per target (logistic)
};

// Gaussian predictive per target: mean = x M[:,j], variance = λ + x Σ xᵀ.
PredictiveOutput predict_linear(const Posterior& post, double lambda,
                                const SurveillanceRow& row);

// Probit-style moderated sigmoid per target:
// a = x M[:,j], v = x Σ_j xᵀ, p = σ(a / sqrt(1 + πv/8)).
PredictiveOutput predict_logistic(const Posterior& post,
                                  const SurveillanceRow& row);

// 1 − |truth ∩ found| / |truth|. Throws EmptyTruth when truth is empty.
double failure_rate(const std::vector<Eigen::Index>& truth,
                    const std::vector<Eigen::Index>& found);

// ‖y_true − y_pred‖_F / (T·N). Divides by the element count, not its square
// root; see rmse() for the conventional normalization.
double rmse_paper(const Eigen::MatrixXd& y_true,
                  const Eigen::MatrixXd& y_pred);

// ‖y_true − y_pred‖_F / sqrt(T·N).
double rmse(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred);

// Slice the sentinel columns out of an observed test window and embed them;
// row t becomes the surveillance input for predicting time t+1.
std::vector<SurveillanceRow> extract_surveillance(
    const DynamicsMatrix& observed, const std::vector<Eigen::Index>& sentinels,
    const BasisSet* basis = nullptr);

// One-step-ahead panel prediction: row t of the result predicts all N
// components at time t+1 from the observed sentinel row at time t (linear:
// predictive means; logistic: probabilities). lambda is required for the
// linear kind only.
Eigen::MatrixXd rollout(const Posterior& post, std::optional<double> lambda,
                        const std::vector<SurveillanceRow>& rows);

}  // namespace sentinet
