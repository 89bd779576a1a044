#pragma once

#include <Eigen/Dense>

#include "sentinet/errors.hpp"

namespace sentinet {

// Compact representative of a diagonal-block matrix. The dense form is an
// nk×mk matrix whose (i,j) sub-block is entries(i,j)·I_k; only the n×m
// matrix of scalars and the block size k are stored. All fast-path algebra
// happens on this form, never on the lift.
class ProjectiveMatrix {
public:
  ProjectiveMatrix(Eigen::MatrixXd entries, Eigen::Index block_size);

  const Eigen::MatrixXd& entries() const { return entries_; }
  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  Eigen::Index block_size() const { return block_size_; }

  static ProjectiveMatrix identity(Eigen::Index n, Eigen::Index block_size);

private:
  Eigen::MatrixXd entries_;
  Eigen::Index block_size_;
};

// Materialized nk×mk form. Exists for test oracles and dense-path timing
// comparisons only; nothing in the fast path allocates it.
using DenseBlockMatrix = Eigen::MatrixXd;

DenseBlockMatrix lift(const ProjectiveMatrix& p);

// Inverse of lift. Throws NotDiagonalBlock when any sub-block deviates from
// the a·I_k shape by more than tol (absolute), DimensionMismatch when the
// dense dimensions are not divisible by block_size.
ProjectiveMatrix project(const DenseBlockMatrix& d, Eigen::Index block_size,
                         double tol = 1e-12);

// Product of the represented dense matrices, computed as the product of the
// representatives (the homomorphism property of diagonal-block matrices).
ProjectiveMatrix pm_multiply(const ProjectiveMatrix& a,
                             const ProjectiveMatrix& b);

// Inverse of the represented dense matrix, computed by inverting the n×n
// entries matrix. Throws SingularMatrix when the reciprocal condition
// number is below 1e-14.
ProjectiveMatrix pm_inverse(const ProjectiveMatrix& a);

// trace(lift(a)) = block_size · trace(entries).
double pm_trace(const ProjectiveMatrix& a);

}  // namespace sentinet
