#include "sentinet/gsbl.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace sentinet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::VectorXd expand_gamma(const Eigen::VectorXd& gamma,
                             const std::vector<Eigen::Index>& group_sizes) {
  Eigen::Index p = 0;
  for (auto w : group_sizes) p += w;
  Eigen::VectorXd out(p);
  Eigen::Index at = 0;
  for (size_t g = 0; g < group_sizes.size(); ++g) {
    out.segment(at, group_sizes[g]).setConstant(gamma(static_cast<Eigen::Index>(g)));
    at += group_sizes[g];
  }
  return out;
}

void check_prior(const LagPair& lp, const GroupPrior& prior) {
  if (prior.gamma.size() != static_cast<Eigen::Index>(prior.group_sizes.size())) {
    throw DimensionMismatch("gamma length " + std::to_string(prior.gamma.size()) +
                            " does not match group count " +
                            std::to_string(prior.group_sizes.size()));
  }
  Eigen::Index p = 0;
  for (auto w : prior.group_sizes) {
    if (w < 1) throw DimensionMismatch("group widths must be positive");
    p += w;
  }
  if (p != lp.p()) {
    throw DimensionMismatch("group widths sum to " + std::to_string(p) +
                            " but the design has " + std::to_string(lp.p()) +
                            " columns");
  }
  if (lp.X.rows() != lp.Y.rows()) {
    throw DimensionMismatch("X and Y row counts differ");
  }
  if ((prior.gamma.array() <= 0.0).any()) {
    throw BadConfig("prior variances must be positive");
  }
}

// Cholesky with the one-shot jitter retry.
Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& a,
                                       const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = a;
  jittered.diagonal().array() += 1e-10 * a.diagonal().mean();
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  throw NumericalFailure(std::string(what) +
                         ": precision matrix is not SPD even after jitter");
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

struct LinearFactorization {
  Posterior posterior;
  double log_det_precision{0.0};  // log det(diag(1/γ) + XᵀX/λ)
};

LinearFactorization linear_posterior_cached(const Eigen::MatrixXd& xtx,
                                            const Eigen::MatrixXd& xty,
                                            Eigen::Index n_targets,
                                            const Eigen::VectorXd& gamma_exp,
                                            double lambda) {
  const Eigen::Index p = xtx.rows();
  LinearFactorization out;
  out.posterior.kind = SystemKind::linear;
  if (xty.size() == 0 && n_targets >= 0 && xtx.size() == 0) {
    // Degenerate empty design; nothing to factor.
    out.posterior.M = Eigen::MatrixXd::Zero(0, n_targets);
    out.posterior.sigma = {Eigen::MatrixXd::Zero(0, 0)};
    return out;
  }
  Eigen::MatrixXd precision = xtx / lambda;
  precision.diagonal() += gamma_exp.cwiseInverse();
  const auto llt = spd_factor(precision, "linear posterior");
  out.log_det_precision = log_det_from_llt(llt);
  Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
  out.posterior.sigma = {0.5 * (sigma + sigma.transpose())};
  out.posterior.M = llt.solve(xty) / lambda;
  return out;
}

}  // namespace

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double jj_lambda(double xi) {
  const double z = std::abs(xi);
  if (z < 1e-6) {
    return 0.125 - z * z / 96.0;
  }
  return std::tanh(z / 2.0) / (4.0 * z);
}

double bernoulli_likelihood(double z, bool y) {
  return y ? sigmoid(z) : sigmoid(-z);
}

double variational_bound(double z, bool y, double xi) {
  const double target = y ? 1.0 : 0.0;
  const double log_h = std::log(sigmoid(xi)) + z * target -
                       (z + xi) / 2.0 - jj_lambda(xi) * (z * z - xi * xi);
  return std::exp(log_h);
}

Posterior linear_posterior(const LagPair& lp, const GroupPrior& prior,
                           const LinearHyper& hyper) {
  check_prior(lp, prior);
  if (hyper.lambda <= 0.0) {
    throw BadConfig("lambda must be positive");
  }
  const Eigen::VectorXd ge = expand_gamma(prior.gamma, prior.group_sizes);
  if (lp.t_prime() == 0) {
    Posterior post;
    post.kind = SystemKind::linear;
    post.M = Eigen::MatrixXd::Zero(lp.p(), lp.n_targets());
    post.sigma = {Eigen::MatrixXd(ge.asDiagonal())};
    return post;
  }
  const Eigen::MatrixXd xtx = lp.X.transpose() * lp.X;
  const Eigen::MatrixXd xty = lp.X.transpose() * lp.Y;
  return linear_posterior_cached(xtx, xty, lp.n_targets(), ge, hyper.lambda)
      .posterior;
}

Posterior logistic_posterior(const LagPair& lp, const GroupPrior& prior,
                             const LogisticHyper& hyper) {
  check_prior(lp, prior);
  if (hyper.xi.rows() != lp.t_prime() || hyper.xi.cols() != lp.n_targets()) {
    throw DimensionMismatch("xi must be T'xN");
  }
  const Eigen::Index p = lp.p();
  const Eigen::Index n = lp.n_targets();
  const Eigen::VectorXd ge = expand_gamma(prior.gamma, prior.group_sizes);

  Posterior post;
  post.kind = SystemKind::logistic;
  post.M.resize(p, n);
  post.sigma.resize(static_cast<size_t>(n));
  const Eigen::MatrixXd shifted = lp.Y.array() - 0.5;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd weights(lp.t_prime());
    for (Eigen::Index t = 0; t < lp.t_prime(); ++t) {
      weights(t) = 2.0 * jj_lambda(hyper.xi(t, j));
    }
    Eigen::MatrixXd precision =
        lp.X.transpose() * weights.asDiagonal() * lp.X;
    precision.diagonal() += ge.cwiseInverse();
    const auto llt = spd_factor(precision, "logistic posterior");
    Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
    post.sigma[static_cast<size_t>(j)] = 0.5 * (sigma + sigma.transpose());
    post.M.col(j) = llt.solve(lp.X.transpose() * shifted.col(j));
  }
  return post;
}

Eigen::VectorXd update_gamma(const Posterior& post,
                             const std::vector<Eigen::Index>& group_sizes) {
  const Eigen::Index n = post.M.cols();
  const auto n_groups = static_cast<Eigen::Index>(group_sizes.size());
  Eigen::VectorXd out(n_groups);
  Eigen::Index at = 0;
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    const Eigen::Index w = group_sizes[static_cast<size_t>(g)];
    double num = post.M.middleRows(at, w).squaredNorm();
    if (post.kind == SystemKind::linear) {
      num += static_cast<double>(n) *
             post.shared_sigma().diagonal().segment(at, w).sum();
    } else {
      for (const auto& sigma : post.sigma) {
        num += sigma.diagonal().segment(at, w).sum();
      }
    }
    out(g) = std::max(num / (static_cast<double>(n) * static_cast<double>(w)),
                      kGammaFloor);
    at += w;
  }
  return out;
}

double update_lambda(const LagPair& lp, const Posterior& post) {
  if (post.kind != SystemKind::linear) {
    throw Error("update_lambda requires a linear posterior");
  }
  if (lp.t_prime() == 0) {
    throw DimensionMismatch("update_lambda needs at least one observation");
  }
  const double resid = (lp.Y - lp.X * post.M).squaredNorm();
  const Eigen::MatrixXd xtx = lp.X.transpose() * lp.X;
  const double trace = post.shared_sigma().cwiseProduct(xtx).sum();
  const double n = static_cast<double>(lp.n_targets());
  return (resid + n * trace) / (static_cast<double>(lp.t_prime()) * n);
}

Eigen::MatrixXd update_xi(const LagPair& lp, const Posterior& post) {
  if (post.kind != SystemKind::logistic) {
    throw Error("update_xi requires a logistic posterior");
  }
  const Eigen::Index n = post.M.cols();
  Eigen::MatrixXd xi(lp.t_prime(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd u = lp.X * post.M.col(j);
    const Eigen::VectorXd quad =
        ((lp.X * post.sigma_for(j)).cwiseProduct(lp.X)).rowwise().sum();
    xi.col(j) =
        (quad.array() + u.array().square()).max(0.0).sqrt().matrix();
  }
  return xi;
}

double marginal_log_likelihood(const LagPair& lp, const GroupPrior& prior,
                               const LinearHyper& hyper) {
  check_prior(lp, prior);
  const Eigen::Index tp = lp.t_prime();
  if (tp == 0) return 0.0;
  const Eigen::Index p = lp.p();
  const Eigen::Index n = lp.n_targets();
  const Eigen::VectorXd ge = expand_gamma(prior.gamma, prior.group_sizes);
  const double lambda = hyper.lambda;

  double log_det_c = 0.0;
  double quad_sum = 0.0;
  if (tp <= p) {
    Eigen::MatrixXd cov =
        lp.X * ge.asDiagonal() * lp.X.transpose();
    cov.diagonal().array() += lambda;
    const auto llt = spd_factor(cov, "marginal likelihood");
    log_det_c = log_det_from_llt(llt);
    quad_sum = (lp.Y.cwiseProduct(llt.solve(lp.Y))).sum();
  } else {
    Eigen::MatrixXd precision = (lp.X.transpose() * lp.X) / lambda;
    precision.diagonal() += ge.cwiseInverse();
    const auto llt = spd_factor(precision, "marginal likelihood");
    log_det_c = static_cast<double>(tp) * std::log(lambda) +
                ge.array().log().sum() + log_det_from_llt(llt);
    const Eigen::MatrixXd xty = lp.X.transpose() * lp.Y;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double yy = lp.Y.col(j).squaredNorm();
      const double red = xty.col(j).dot(llt.solve(xty.col(j))) / lambda;
      quad_sum += (yy - red) / lambda;
    }
  }
  return -0.5 * (static_cast<double>(n) *
                     (static_cast<double>(tp) * std::log(kTwoPi) + log_det_c) +
                 quad_sum);
}

FitResult fit(const LagPair& lp, SystemKind kind, const FitInit& init,
              const FitControl& ctrl) {
  const Eigen::Index p = lp.p();
  const Eigen::Index n = lp.n_targets();
  const Eigen::Index tp = lp.t_prime();
  const auto n_groups = static_cast<Eigen::Index>(lp.group_sizes.size());
  if (ctrl.max_iters < 1) {
    throw BadConfig("max_iters must be >= 1");
  }

  const double y_var =
      tp > 0 ? (lp.Y.array() - lp.Y.array().mean()).square().mean() : 1.0;

  Eigen::VectorXd gamma;
  double lambda = std::max(y_var, 1e-6);
  Eigen::MatrixXd xi;
  if (init.random_seed.has_value()) {
    std::mt19937_64 rng(*init.random_seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    gamma.resize(n_groups);
    for (Eigen::Index g = 0; g < n_groups; ++g) gamma(g) = unif(rng);
    lambda = std::max(y_var * unif(rng), 1e-6);
    xi.resize(tp, n);
    for (Eigen::Index t = 0; t < tp; ++t) {
      for (Eigen::Index j = 0; j < n; ++j) xi(t, j) = unif(rng);
    }
  } else {
    gamma = Eigen::VectorXd::Ones(n_groups);
    xi = Eigen::MatrixXd::Ones(tp, n);
  }
  if (init.gamma.has_value()) {
    if (init.gamma->size() != n_groups) {
      throw DimensionMismatch("initial gamma length mismatch");
    }
    gamma = init.gamma->cwiseMax(kGammaFloor);
  }
  if (init.lambda.has_value()) {
    lambda = std::max(*init.lambda, kLambdaFloor);
  }
  if (init.xi.has_value()) {
    if (init.xi->rows() != tp || init.xi->cols() != n) {
      throw DimensionMismatch("initial xi shape mismatch");
    }
    xi = init.xi->cwiseAbs();
  }

  FitResult result;
  result.trace.converged = false;

  GroupPrior prior{gamma, lp.group_sizes};
  // The design never changes across iterations; hoist the Gram pieces.
  Eigen::MatrixXd xtx, xty;
  if (kind == SystemKind::linear && tp > 0) {
    xtx = lp.X.transpose() * lp.X;
    xty = lp.X.transpose() * lp.Y;
  }

  auto make_posterior = [&](double* log_det_out) -> Posterior {
    if (kind == SystemKind::linear) {
      if (tp == 0) {
        Posterior post;
        post.kind = SystemKind::linear;
        post.M = Eigen::MatrixXd::Zero(p, n);
        post.sigma = {Eigen::MatrixXd(
            expand_gamma(prior.gamma, prior.group_sizes).asDiagonal())};
        if (log_det_out != nullptr) {
          *log_det_out = 0.0;
        }
        return post;
      }
      auto fact = linear_posterior_cached(
          xtx, xty, n, expand_gamma(prior.gamma, prior.group_sizes), lambda);
      if (log_det_out != nullptr) {
        *log_det_out = fact.log_det_precision;
      }
      return std::move(fact.posterior);
    }
    return logistic_posterior(lp, prior, LogisticHyper{xi});
  };

  auto mll_from_factorization = [&](const Posterior& post,
                                    double log_det_precision) -> double {
    if (kind != SystemKind::linear) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    if (tp == 0) return 0.0;
    const Eigen::VectorXd ge = expand_gamma(prior.gamma, prior.group_sizes);
    const double log_det_c = static_cast<double>(tp) * std::log(lambda) +
                             ge.array().log().sum() + log_det_precision;
    double quad_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double yy = lp.Y.col(j).squaredNorm();
      // M = Σ Xᵀ Y / λ, so ΣXᵀy_j already sits in M's column.
      const double red = xty.col(j).dot(post.M.col(j));
      quad_sum += (yy - red) / lambda;
    }
    return -0.5 * (static_cast<double>(n) * (static_cast<double>(tp) *
                                                 std::log(kTwoPi) +
                                             log_det_c) +
                   quad_sum);
  };

  Posterior post;
  int it = 0;
  for (it = 1; it <= ctrl.max_iters; ++it) {
    double log_det_precision = 0.0;
    post = make_posterior(&log_det_precision);

    FitIterate snap;
    snap.gamma = prior.gamma;
    snap.lambda = lambda;
    snap.xi_mean = (kind == SystemKind::logistic && xi.size() > 0)
                       ? xi.array().mean()
                       : 0.0;
    snap.mll = mll_from_factorization(post, log_det_precision);
    result.trace.iterates.push_back(std::move(snap));

    const Eigen::VectorXd gamma_next = update_gamma(post, lp.group_sizes);
    if (kind == SystemKind::linear && tp > 0) {
      lambda = std::max(update_lambda(lp, post), kLambdaFloor);
    } else if (kind == SystemKind::logistic) {
      xi = update_xi(lp, post);
    }
    const double rel =
        ((gamma_next - prior.gamma).cwiseAbs().array() /
         prior.gamma.cwiseMax(kGammaFloor).array())
            .maxCoeff();
    prior.gamma = gamma_next;
    if (rel < ctrl.tol) {
      result.trace.converged = true;
      break;
    }
  }
  result.trace.iterations = std::min(it, ctrl.max_iters);

  // Refresh the posterior at the final hyperparameters and close the trace.
  double log_det_final = 0.0;
  post = make_posterior(&log_det_final);
  FitIterate last;
  last.gamma = prior.gamma;
  last.lambda = lambda;
  last.xi_mean =
      (kind == SystemKind::logistic && xi.size() > 0) ? xi.array().mean() : 0.0;
  last.mll = mll_from_factorization(post, log_det_final);
  result.trace.iterates.push_back(std::move(last));

  result.posterior = std::move(post);
  result.prior = std::move(prior);
  result.linear = LinearHyper{lambda};
  result.logistic = LogisticHyper{std::move(xi)};
  return result;
}

}  // namespace sentinet
