#pragma once

#include "peerpanel/design.hpp"
#include "peerpanel/types.hpp"

namespace peerpanel {

// Implicit W = I - Q Q' for an orthonormal basis Q of the span of a set of
// fixed-effect and control columns. The R x R matrix is never formed.
//
// The basis is held in two blocks: a sparse block of normalized indicator
// columns with disjoint supports (group, cell or period dummies), and a dense
// block spanning whatever the remaining columns add after the indicators are
// projected out. Rank deficiency among the source columns is absorbed by the
// basis.
class Annihilator {
 public:
  // Identity: annihilates nothing.
  explicit Annihilator(Index rows = 0) : rows_(rows) {}

  // `indicators` may have any number of columns; if their supports overlap
  // they are treated as ordinary dense columns.
  Annihilator(const SparseMatrix& indicators, const MatrixXd& extra);

  Index rows() const { return rows_; }
  Index rank() const { return q_indicator_.cols() + q_dense_.cols(); }
  // Source columns handed to the constructor.
  Index source_cols() const { return source_cols_; }

  MatrixXd apply(const MatrixXd& A) const;
  MatrixXd apply(const SparseMatrix& A) const;
  VectorXd apply(const VectorXd& v) const;

  // Q' A, stacked [indicator block; dense block].
  MatrixXd coefficients(const MatrixXd& A) const;
  MatrixXd coefficients(const SparseMatrix& A) const;

  // Dense Q (R x rank); for tests and small problems.
  MatrixXd basis() const;

  const SparseMatrix& indicator_basis() const { return q_indicator_; }
  const MatrixXd& dense_basis() const { return q_dense_; }

 private:
  Index rows_ = 0;
  Index source_cols_ = 0;
  SparseMatrix q_indicator_;
  MatrixXd q_dense_;
};

// Annihilator of [D, fe_extra].
Annihilator make_annihilator(const StackedDesign& design);

// True when every row has at most one nonzero.
bool disjoint_columns(const SparseMatrix& A);

}  // namespace peerpanel
