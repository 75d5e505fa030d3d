#pragma once

#include <string>
#include <vector>

#include "peerpanel/annihilator.hpp"
#include "peerpanel/types.hpp"

namespace peerpanel {

// Threshold policy for numerical rank. `relative` cuts at
// max(rows, cols) * sigma_max * machine-eps * factor; `absolute` cuts at
// `value` directly.
struct RankPolicy {
  enum class Kind { relative, absolute };
  Kind kind = Kind::relative;
  double value = 64.0;

  static RankPolicy relative(double factor = 64.0) { return {Kind::relative, factor}; }
  static RankPolicy absolute(double eps) { return {Kind::absolute, eps}; }
};

struct RankInfo {
  Index rank = 0;
  double threshold = 0.0;
  // Smallest singular value kept and largest one dropped; 0 / NaN at the ends.
  double sigma_above = 0.0;
  double sigma_below = 0.0;
  std::string method;
  VectorXd singular_values;  // descending
};

// Singular values of A, descending. Tall or wide inputs are first reduced by
// a QR factorization so the SVD runs on a square factor.
VectorXd singular_values(const MatrixXd& A);

// Throws NonFinite on NaN/inf entries.
RankInfo rank_of(const MatrixXd& A, RankPolicy policy = RankPolicy());

// Rank from a Gram matrix A'A: sigma_i = sqrt(lambda_i). The cut is
// max(rows, cols) * lambda_max * eps * factor in the squared scale, which is
// coarser than the dense route by a square root.
RankInfo rank_from_gram(const MatrixXd& gram, Index rows, RankPolicy policy = RankPolicy());

// rank(W S) for sparse S without forming W S when the problem is large:
// the Gram matrix S'S - (Q'S)'(Q'S) is used instead. Dense otherwise.
RankInfo projected_rank(const Annihilator& W, const SparseMatrix& S,
                        RankPolicy policy = RankPolicy(), double dense_limit = 4e6);

// Orthonormal basis (cols x k) of the right null space of A.
MatrixXd null_space(const MatrixXd& A, RankPolicy policy = RankPolicy(), RankInfo* info = nullptr);

struct IndependenceResult {
  std::vector<bool> independent;  // one entry per probe index
  MatrixXd kernel;                // L x k null-space basis of the vectorized system
  RankInfo rank;
};

// Matrix l of the collection is maximally linearly independent when its
// coefficient vanishes in every vanishing linear combination. Matrices are
// vectorized and scaled to unit norm; a zero matrix is never independent.
// Throws ShapeMismatch.
IndependenceResult maximal_linear_independence(const std::vector<MatrixXd>& mats,
                                               const std::vector<Index>& probe,
                                               double tol = 1e-8);

// Same test from the L x L Frobenius Gram matrix of the collection. The
// eigenvalue cut is at `eig_tol` of the normalized Gram, so agreement with
// the dense route holds only away from borderline cases.
IndependenceResult maximal_linear_independence_gram(const MatrixXd& gram,
                                                    const std::vector<Index>& probe,
                                                    double eig_tol = 1e-12, double tol = 1e-6);

}  // namespace peerpanel
