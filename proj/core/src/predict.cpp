#include "sentinet/predict.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace sentinet {

namespace {

constexpr double kPiOver8 = 0.39269908169872415480783042290994;

void check_row(const Posterior& post, const SurveillanceRow& row) {
  if (row.values.cols() != post.M.rows()) {
    throw DimensionMismatch("surveillance row has " +
                            std::to_string(row.values.cols()) +
                            " features but the posterior expects " +
                            std::to_string(post.M.rows()));
  }
}

}  // namespace

PredictiveOutput predict_linear(const Posterior& post, double lambda,
                                const SurveillanceRow& row) {
  check_row(post, row);
  PredictiveOutput out;
  out.kind = SystemKind::linear;
  out.mean = (row.values * post.M).transpose();
  const double spread =
      (row.values * post.shared_sigma()).dot(row.values);
  out.variance =
      Eigen::VectorXd::Constant(post.M.cols(), lambda + spread);
  return out;
}

PredictiveOutput predict_logistic(const Posterior& post,
                                  const SurveillanceRow& row) {
  check_row(post, row);
  PredictiveOutput out;
  out.kind = SystemKind::logistic;
  const Eigen::Index n = post.M.cols();
  out.probability.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double a = row.values.dot(post.M.col(j));
    const double v =
        std::max(0.0, (row.values * post.sigma_for(j)).dot(row.values));
    const double tau = 1.0 / std::sqrt(1.0 + kPiOver8 * v);
    out.probability(j) = sigmoid(tau * a);
  }
  return out;
}

double failure_rate(const std::vector<Eigen::Index>& truth,
                    const std::vector<Eigen::Index>& found) {
  if (truth.empty()) {
    throw EmptyTruth("failure_rate requires a non-empty ground-truth set");
  }
  const std::set<Eigen::Index> truth_set(truth.begin(), truth.end());
  const std::set<Eigen::Index> found_set(found.begin(), found.end());
  size_t hits = 0;
  for (auto idx : truth_set) {
    hits += found_set.count(idx);
  }
  return 1.0 - static_cast<double>(hits) /
                   static_cast<double>(truth_set.size());
}

double rmse_paper(const Eigen::MatrixXd& y_true,
                  const Eigen::MatrixXd& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
    throw ShapeMismatch("rmse operands differ: " +
                        std::to_string(y_true.rows()) + "x" +
                        std::to_string(y_true.cols()) + " vs " +
                        std::to_string(y_pred.rows()) + "x" +
                        std::to_string(y_pred.cols()));
  }
  return (y_true - y_pred).norm() /
         static_cast<double>(y_true.rows() * y_true.cols());
}

double rmse(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
    throw ShapeMismatch("rmse operands differ: " +
                        std::to_string(y_true.rows()) + "x" +
                        std::to_string(y_true.cols()) + " vs " +
                        std::to_string(y_pred.rows()) + "x" +
                        std::to_string(y_pred.cols()));
  }
  return (y_true - y_pred).norm() /
         std::sqrt(static_cast<double>(y_true.rows() * y_true.cols()));
}

std::vector<SurveillanceRow> extract_surveillance(
    const DynamicsMatrix& observed, const std::vector<Eigen::Index>& sentinels,
    const BasisSet* basis) {
  for (auto idx : sentinels) {
    if (idx < 0 || idx >= observed.n_components()) {
      throw IndexOutOfRange("sentinel id " + std::to_string(idx) +
                            " outside [0, " +
                            std::to_string(observed.n_components()) + ")");
    }
  }
  const Eigen::Index t = observed.t_rows();
  const auto k = static_cast<Eigen::Index>(sentinels.size());
  Eigen::MatrixXd cols(t, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    cols.col(i) = observed.values.col(sentinels[static_cast<size_t>(i)]);
  }
  Eigen::MatrixXd features =
      basis == nullptr ? cols : embed_states(cols, *basis);
  std::vector<SurveillanceRow> rows(static_cast<size_t>(t));
  for (Eigen::Index r = 0; r < t; ++r) {
    rows[static_cast<size_t>(r)].values = features.row(r);
    rows[static_cast<size_t>(r)].sentinels = sentinels;
  }
  return rows;
}

Eigen::MatrixXd rollout(const Posterior& post, std::optional<double> lambda,
                        const std::vector<SurveillanceRow>& rows) {
  const auto t = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(t, post.M.cols());
  for (Eigen::Index r = 0; r < t; ++r) {
    const auto& row = rows[static_cast<size_t>(r)];
    if (post.kind == SystemKind::linear) {
      if (!lambda.has_value()) {
        throw BadConfig("linear rollout requires lambda");
      }
      out.row(r) = predict_linear(post, *lambda, row).mean.transpose();
    } else {
      out.row(r) = predict_logistic(post, row).probability.transpose();
    }
  }
  return out;
}

}  // namespace sentinet
