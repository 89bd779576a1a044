#include "sentinet/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sentinet {

std::string to_string(SystemKind k) {
  return k == SystemKind::linear ? "linear" : "logistic";
}

SystemKind system_kind_from_string(const std::string& s) {
  if (s == "linear") return SystemKind::linear;
  if (s == "logistic") return SystemKind::logistic;
  throw BadConfig("unknown system kind '" + s +
                  "' (expected linear or logistic)");
}

BasisSet make_basis(const std::vector<std::string>& names) {
  BasisSet out;
  for (const auto& name : names) {
    if (name == "identity") {
      out.functions.push_back({"identity", [](double x) { return x; }});
    } else if (name == "quadratic") {
      out.functions.push_back({"quadratic", [](double x) { return x * x + x; }});
    } else if (name == "sin") {
      out.functions.push_back({"sin", [](double x) { return std::sin(x); }});
    } else {
      throw BadConfig("unknown basis function '" + name +
                      "' (registry: identity, quadratic, sin)");
    }
  }
  if (out.functions.empty()) {
    throw BadConfig("basis list must not be empty");
  }
  return out;
}

std::vector<std::string> basis_registry_names() {
  return {"identity", "quadratic", "sin"};
}

Eigen::MatrixXd embed_states(const Eigen::MatrixXd& states,
                             const BasisSet& basis) {
  const Eigen::Index t = states.rows();
  const Eigen::Index n = states.cols();
  const Eigen::Index m = basis.size();
  Eigen::MatrixXd out(t, n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto& fn = basis.functions[static_cast<size_t>(b)];
      for (Eigen::Index r = 0; r < t; ++r) {
        const double v = fn.fn(states(r, i));
        if (!std::isfinite(v)) {
          throw NonFiniteEmbedding("basis function '" + fn.name +
                                   "' produced a non-finite value at row " +
                                   std::to_string(r) + ", component " +
                                   std::to_string(i));
        }
        out(r, i * m + b) = v;
      }
    }
  }
  return out;
}

LagPair make_lag_pair(const DynamicsMatrix& d, const BasisSet* basis) {
  const Eigen::Index t = d.t_rows();
  const Eigen::Index n = d.n_components();
  if (t < 2) {
    throw EmptyDynamics("need at least 2 time steps to form a lag pair, got " +
                        std::to_string(t));
  }
  LagPair lp;
  lp.Y = d.values.bottomRows(t - 1);
  const Eigen::MatrixXd states = d.values.topRows(t - 1);
  if (basis == nullptr) {
    lp.X = states;
    lp.group_sizes.assign(static_cast<size_t>(n), 1);
  } else {
    lp.X = embed_states(states, *basis);
    lp.group_sizes.assign(static_cast<size_t>(n), basis->size());
  }
  return lp;
}

LagPair concat_lag_pairs(const std::vector<LagPair>& parts) {
  if (parts.empty()) {
    throw EmptyDynamics("cannot concatenate zero lag pairs");
  }
  const auto& first = parts.front();
  Eigen::Index total = 0;
  for (const auto& part : parts) {
    if (part.group_sizes != first.group_sizes ||
        part.Y.cols() != first.Y.cols()) {
      throw DimensionMismatch("lag pairs have mismatched layouts");
    }
    total += part.t_prime();
  }
  LagPair out;
  out.group_sizes = first.group_sizes;
  out.X.resize(total, first.p());
  out.Y.resize(total, first.n_targets());
  Eigen::Index row = 0;
  for (const auto& part : parts) {
    out.X.middleRows(row, part.t_prime()) = part.X;
    out.Y.middleRows(row, part.t_prime()) = part.Y;
    row += part.t_prime();
  }
  return out;
}

Eigen::MatrixXd apply_snr(const Eigen::MatrixXd& clean, double snr_db,
                          std::uint64_t seed) {
  if (clean.size() == 0) {
    throw EmptyDynamics("apply_snr requires a non-empty panel");
  }
  if (std::isinf(snr_db) && snr_db > 0) {
    return clean;
  }
  const double power = clean.array().square().mean();
  const double noise_var = power / std::pow(10.0, snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var));
  Eigen::MatrixXd out = clean;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(r, c) += gauss(rng);
    }
  }
  return out;
}

namespace {

// Simulation steps share this fixed burn-in when noise keeps the linear
// system persistently excited.
constexpr Eigen::Index kBurnIn = 100;

std::vector<Eigen::Index> sample_sentinels(Eigen::Index n, Eigen::Index k,
                                           std::mt19937_64& rng) {
  std::vector<Eigen::Index> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first k entries become the sample.
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)],
              pool[static_cast<size_t>(pick(rng))]);
  }
  std::vector<Eigen::Index> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::RowVectorXd embed_row(const Eigen::RowVectorXd& state,
                             const BasisSet* basis) {
  if (basis == nullptr) {
    return state;
  }
  const Eigen::Index n = state.cols();
  const Eigen::Index m = basis->size();
  Eigen::RowVectorXd out(n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index b = 0; b < m; ++b) {
      out(i * m + b) = basis->functions[static_cast<size_t>(b)].fn(state(i));
    }
  }
  return out;
}

}  // namespace

std::pair<DynamicsMatrix, SyntheticTruth> generate_synthetic(
    const SyntheticConfig& cfg) {
  const Eigen::Index n = cfg.n_components;
  const Eigen::Index t = cfg.t_rows;
  if (n < 1 || t < 2) {
    throw BadConfig("generator needs n_components >= 1 and t_rows >= 2");
  }
  if (cfg.n_sentinels < 1 || cfg.n_sentinels > n) {
    throw BadConfig("n_sentinels must lie in [1, n_components]");
  }
  if (cfg.var_big < 0 || cfg.var_small < 0) {
    throw BadConfig("variance parameters must be nonnegative");
  }
  if (cfg.kind == SystemKind::logistic &&
      (cfg.ber < 0.0 || cfg.ber > 1.0)) {
    throw BadConfig("ber must lie in [0, 1]");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticTruth truth;
  truth.kind = cfg.kind;
  truth.sentinels = sample_sentinels(n, cfg.n_sentinels, rng);

  // Step 1: half-normal γ draws, large variance on sentinels.
  std::vector<bool> is_sentinel(static_cast<size_t>(n), false);
  for (auto idx : truth.sentinels) is_sentinel[static_cast<size_t>(idx)] = true;
  truth.gamma_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = is_sentinel[static_cast<size_t>(i)] ? cfg.var_big
                                                           : cfg.var_small;
    truth.gamma_true(i) = std::abs(gauss(rng)) * std::sqrt(var);
  }

  // Step 2: influence rows from the per-group prior N(0, γ_i I).
  BasisSet basis_store;
  const BasisSet* basis = nullptr;
  Eigen::Index m = 1;
  if (!cfg.basis_names.empty()) {
    basis_store = make_basis(cfg.basis_names);
    basis = &basis_store;
    m = basis_store.size();
  }
  const Eigen::Index p = n * m;
  truth.s_true.resize(p, n);
  for (Eigen::Index g = 0; g < n; ++g) {
    const double sd = std::sqrt(truth.gamma_true(g));
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        truth.s_true(g * m + r, c) = gauss(rng) * sd;
      }
    }
  }

  // Stability guard for continuous rolls: rescale so the linearization at
  // the origin has spectral radius 0.95 when it exceeds 1. Every registry
  // basis function has unit slope at 0, so the linearization is the sum of
  // each group's rows.
  truth.stability_scale = 1.0;
  if (cfg.kind == SystemKind::linear) {
    Eigen::MatrixXd linearization = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index g = 0; g < n; ++g) {
      for (Eigen::Index r = 0; r < m; ++r) {
        linearization.row(g) += truth.s_true.row(g * m + r);
      }
    }
    const double rho = spectral_radius(linearization);
    if (rho > 1.0) {
      truth.stability_scale = 0.95 / rho;
      truth.s_true *= truth.stability_scale;
    }
  }

  DynamicsMatrix d;
  d.values.resize(t, n);

  if (cfg.kind == SystemKind::linear) {
    d.mode = Mode::continuous;
    const bool noise_free = std::isinf(cfg.snr_db) && cfg.snr_db > 0;
    if (noise_free) {
      // Exact autonomous recursion from a Gaussian initial state.
      Eigen::RowVectorXd state(n);
      for (Eigen::Index i = 0; i < n; ++i) state(i) = gauss(rng);
      d.values.row(0) = state;
      for (Eigen::Index step = 1; step < t; ++step) {
        state = embed_row(state, basis) * truth.s_true;
        d.values.row(step) = state;
      }
    } else {
      // Unit-variance process noise keeps the system persistently excited;
      // the burn-in discards the transient so the panel is stationary. The
      // SNR knob then adds observation noise relative to the panel power.
      Eigen::RowVectorXd state(n);
      for (Eigen::Index i = 0; i < n; ++i) state(i) = gauss(rng);
      for (Eigen::Index step = 0; step < kBurnIn; ++step) {
        Eigen::RowVectorXd next = embed_row(state, basis) * truth.s_true;
        for (Eigen::Index i = 0; i < n; ++i) next(i) += gauss(rng);
        state = next;
      }
      d.values.row(0) = state;
      for (Eigen::Index step = 1; step < t; ++step) {
        Eigen::RowVectorXd next = embed_row(state, basis) * truth.s_true;
        for (Eigen::Index i = 0; i < n; ++i) next(i) += gauss(rng);
        state = next;
        d.values.row(step) = state;
      }
      const std::uint64_t noise_seed = rng();
      d.values = apply_snr(d.values, cfg.snr_db, noise_seed);
    }
  } else {
    d.mode = Mode::discrete;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::RowVectorXd state(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      state(i) = unif(rng) < 0.5 ? 1.0 : 0.0;
    }
    d.values.row(0) = state;
    for (Eigen::Index step = 1; step < t; ++step) {
      const Eigen::RowVectorXd act = embed_row(state, basis) * truth.s_true;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-act(i)));
        state(i) = unif(rng) < prob ? 1.0 : 0.0;
      }
      d.values.row(step) = state;
    }
    if (cfg.ber > 0.0) {
      for (Eigen::Index r = 0; r < t; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          if (unif(rng) < cfg.ber) {
            d.values(r, c) = 1.0 - d.values(r, c);
          }
        }
      }
    }
  }

  return {std::move(d), std::move(truth)};
}

}  // namespace sentinet
