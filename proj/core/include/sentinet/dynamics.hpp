#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sentinet/errors.hpp"

namespace sentinet {

enum class Mode { continuous, discrete };
enum class SystemKind { linear, logistic };

std::string to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);

// Observed multivariate time series: row t is the system state at time t.
// Discrete mode stores {0,1} in doubles.
struct DynamicsMatrix {
  Eigen::MatrixXd values;                  // T×N
  Mode mode{Mode::continuous};
  std::vector<std::string> component_ids;  // N labels; empty = unnamed

  Eigen::Index t_rows() const { return values.rows(); }
  Eigen::Index n_components() const { return values.cols(); }
};

// One scalar feature map applied componentwise during embedding.
struct BasisFunction {
  std::string name;
  std::function<double(double)> fn;
};

struct BasisSet {
  std::vector<BasisFunction> functions;
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(functions.size());
  }
};

// Look up basis functions by name from the fixed registry
// {identity, quadratic, sin}; quadratic is x²+x.
BasisSet make_basis(const std::vector<std::string>& names);
std::vector<std::string> basis_registry_names();

// Design/target pair for one-step-ahead regression. X row t is the
// (optionally embedded) state at time t; Y row t is the raw state at t+1.
// Columns of X split into N contiguous groups, one per component; with an
// m-function basis each group has width m.
struct LagPair {
  Eigen::MatrixXd X;  // T'×p
  Eigen::MatrixXd Y;  // T'×N
  std::vector<Eigen::Index> group_sizes;  // N entries summing to p

  Eigen::Index t_prime() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index n_targets() const { return Y.cols(); }
};

LagPair make_lag_pair(const DynamicsMatrix& d,
                      const BasisSet* basis = nullptr);

// Embed a T×N state block into its T×(mN) feature representation.
// Throws NonFiniteEmbedding if any feature value is NaN/Inf.
Eigen::MatrixXd embed_states(const Eigen::MatrixXd& states,
                             const BasisSet& basis);

// Row-stack lag pairs that share a group layout (used to pool training
// segments around excised validation folds).
LagPair concat_lag_pairs(const std::vector<LagPair>& parts);

// Additive i.i.d. Gaussian noise with variance mean(clean²)/10^(snr_db/10).
// snr_db = +inf returns the input unchanged.
Eigen::MatrixXd apply_snr(const Eigen::MatrixXd& clean, double snr_db,
                          std::uint64_t seed);

struct SyntheticConfig {
  Eigen::Index n_components{0};   // N
  Eigen::Index n_sentinels{0};    // number of influential components
  Eigen::Index t_rows{0};         // T
  SystemKind kind{SystemKind::linear};
  double snr_db{std::numeric_limits<double>::infinity()};  // linear noise knob
  double ber{0.0};                // logistic flip probability
  double var_big{10.0};           // half-normal variance of influential γ
  double var_small{0.1};          // half-normal variance of trivial γ
  std::vector<std::string> basis_names;  // embedding used in simulation
  std::uint64_t seed{0};
};

// Planted ground truth emitted alongside generated dynamics.
struct SyntheticTruth {
  Eigen::VectorXd gamma_true;             // length N
  Eigen::MatrixXd s_true;                 // p×N influence matrix
  std::vector<Eigen::Index> sentinels;    // ascending
  SystemKind kind{SystemKind::linear};
  double stability_scale{1.0};            // rescale applied when ρ > 1
};

std::pair<DynamicsMatrix, SyntheticTruth> generate_synthetic(
    const SyntheticConfig& cfg);

}  // namespace sentinet
