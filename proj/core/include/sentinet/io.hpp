#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "sentinet/dynamics.hpp"
#include "sentinet/gsbl.hpp"
#include "sentinet/snma.hpp"

namespace sentinet {

// Shortest round-trip decimal form (to_chars); reading back reproduces the
// exact double, and re-serializing reproduces the exact byte string.
std::string format_double(double v);
double parse_double(const std::string& s);

// Dynamics CSV: optional header row of component ids, then T rows of N
// comma-separated values; discrete mode writes literal 0/1.
void write_dynamics_csv(const std::filesystem::path& path,
                        const DynamicsMatrix& d);
DynamicsMatrix read_dynamics_csv(const std::filesystem::path& path, Mode mode);

void write_truth_json(const std::filesystem::path& path,
                      const SyntheticTruth& truth);
SyntheticTruth read_truth_json(const std::filesystem::path& path);

// Serialized selection output: everything predict-eval needs to reconstruct
// the sentinel predictor.
struct ModelFile {
  SystemKind kind{SystemKind::linear};
  Eigen::Index n_components{0};
  std::vector<std::string> basis_names;
  std::vector<Eigen::Index> sentinels;
  std::vector<Eigen::Index> priority_order;
  Eigen::VectorXd gamma;               // over sentinels
  double lambda{0.0};                  // linear
  Eigen::MatrixXd M;                   // (k·m)×N
  std::vector<Eigen::MatrixXd> sigma;  // 1 block (linear) or N (logistic)
};

ModelFile model_from_selection(const SelectionResult& sel,
                               Eigen::Index n_components,
                               const std::vector<std::string>& basis_names);

void write_model_json(const std::filesystem::path& path, const ModelFile& m);
ModelFile read_model_json(const std::filesystem::path& path);

// Generic matrix CSV (no header), used for prediction panels.
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace sentinet
