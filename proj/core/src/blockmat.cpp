#include "sentinet/blockmat.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

namespace sentinet {

ProjectiveMatrix::ProjectiveMatrix(Eigen::MatrixXd entries,
                                   Eigen::Index block_size)
    : entries_(std::move(entries)), block_size_(block_size) {
  if (block_size_ < 1) {
    throw BadConfig("block_size must be >= 1, got " +
                    std::to_string(block_size_));
  }
  if (entries_.size() == 0) {
    throw BadConfig("projective matrix must have at least one entry");
  }
  if (!entries_.allFinite()) {
    throw BadConfig("projective matrix entries must be finite");
  }
}

ProjectiveMatrix ProjectiveMatrix::identity(Eigen::Index n,
                                            Eigen::Index block_size) {
  return ProjectiveMatrix(Eigen::MatrixXd::Identity(n, n), block_size);
}

DenseBlockMatrix lift(const ProjectiveMatrix& p) {
  const Eigen::Index k = p.block_size();
  DenseBlockMatrix out = DenseBlockMatrix::Zero(p.rows() * k, p.cols() * k);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double a = p.entries()(i, j);
      if (a != 0.0) {
        out.block(i * k, j * k, k, k).diagonal().setConstant(a);
      }
    }
  }
  return out;
}

ProjectiveMatrix project(const DenseBlockMatrix& d, Eigen::Index block_size,
                         double tol) {
  if (block_size < 1) {
    throw BadConfig("block_size must be >= 1");
  }
  if (d.rows() % block_size != 0 || d.cols() % block_size != 0) {
    throw DimensionMismatch("dense matrix " + std::to_string(d.rows()) + "x" +
                            std::to_string(d.cols()) +
                            " is not divisible into blocks of size " +
                            std::to_string(block_size));
  }
  const Eigen::Index n = d.rows() / block_size;
  const Eigen::Index m = d.cols() / block_size;
  Eigen::MatrixXd entries(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto blk = d.block(i * block_size, j * block_size, block_size,
                               block_size);
      const double a = blk(0, 0);
      for (Eigen::Index r = 0; r < block_size; ++r) {
        for (Eigen::Index c = 0; c < block_size; ++c) {
          const double expected = (r == c) ? a : 0.0;
          if (std::abs(blk(r, c) - expected) > tol) {
            throw NotDiagonalBlock(
                "sub-block (" + std::to_string(i) + "," + std::to_string(j) +
                ") entry (" + std::to_string(r) + "," + std::to_string(c) +
                ") deviates from the diagonal-constant form by " +
                std::to_string(std::abs(blk(r, c) - expected)));
          }
        }
      }
      entries(i, j) = a;
    }
  }
  return ProjectiveMatrix(std::move(entries), block_size);
}

ProjectiveMatrix pm_multiply(const ProjectiveMatrix& a,
                             const ProjectiveMatrix& b) {
  if (a.block_size() != b.block_size()) {
    throw DimensionMismatch("block sizes differ: " +
                            std::to_string(a.block_size()) + " vs " +
                            std::to_string(b.block_size()));
  }
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("inner dimensions differ: " +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()));
  }
  return ProjectiveMatrix(a.entries() * b.entries(), a.block_size());
}

ProjectiveMatrix pm_inverse(const ProjectiveMatrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("inverse requires a square matrix, got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a.entries());
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax <= 0.0 || smin / smax < 1e-14) {
    throw SingularMatrix("entries matrix is numerically singular "
                         "(reciprocal condition " +
                         std::to_string(smax > 0.0 ? smin / smax : 0.0) + ")");
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a.entries());
  return ProjectiveMatrix(lu.inverse(), a.block_size());
}

double pm_trace(const ProjectiveMatrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("trace requires a square matrix, got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  return static_cast<double>(a.block_size()) * a.entries().trace();
}

}  // namespace sentinet
