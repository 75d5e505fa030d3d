#include "peerpanel/annihilator.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>

#include "peerpanel/errors.hpp"

namespace peerpanel {

bool disjoint_columns(const SparseMatrix& A)
{
  for (Index r = 0; r < A.rows(); ++r) {
    int nonzeros = 0;
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
      if (it.value() != 0.0 && ++nonzeros > 1) return false;
  }
  return true;
}

Annihilator::Annihilator(const SparseMatrix& indicators, const MatrixXd& extra)
{
  rows_ = indicators.rows() > 0 || indicators.cols() > 0 ? indicators.rows() : extra.rows();
  if (extra.cols() > 0 && extra.rows() != rows_)
    throw DimensionMismatch("annihilator source blocks have different row counts");
  source_cols_ = indicators.cols() + extra.cols();

  MatrixXd dense = extra;
  if (indicators.cols() > 0) {
    if (disjoint_columns(indicators)) {
      VectorXd norm2 = VectorXd::Zero(indicators.cols());
      for (Index r = 0; r < indicators.rows(); ++r)
        for (SparseMatrix::InnerIterator it(indicators, r); it; ++it)
          norm2[it.col()] += it.value() * it.value();
      // Renumber so that all-zero columns disappear.
      std::vector<Index> target(static_cast<std::size_t>(indicators.cols()), -1);
      Index k = 0;
      for (Index c = 0; c < indicators.cols(); ++c)
        if (norm2[c] > 0.0) target[c] = k++;
      std::vector<Triplet> t;
      t.reserve(static_cast<std::size_t>(indicators.nonZeros()));
      for (Index r = 0; r < indicators.rows(); ++r)
        for (SparseMatrix::InnerIterator it(indicators, r); it; ++it)
          if (it.value() != 0.0)
            t.emplace_back(r, target[it.col()], it.value() / std::sqrt(norm2[it.col()]));
      q_indicator_.resize(rows_, k);
      q_indicator_.setFromTriplets(t.begin(), t.end());
      q_indicator_.makeCompressed();
    } else {
      MatrixXd both(rows_, indicators.cols() + extra.cols());
      both << MatrixXd(indicators), extra;
      dense = std::move(both);
    }
  }
  if (q_indicator_.rows() != rows_) q_indicator_.resize(rows_, 0);
  if (dense.cols() == 0) {
    q_dense_.resize(rows_, 0);
    return;
  }

  const double scale = dense.colwise().norm().maxCoeff();
  if (scale == 0.0) {
    q_dense_.resize(rows_, 0);
    return;
  }
  // Two passes of projection keep the blocks orthogonal to working precision.
  for (int pass = 0; pass < 2; ++pass)
    if (q_indicator_.cols() > 0) dense -= q_indicator_ * (q_indicator_.transpose() * dense);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(dense);
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(dense.rows(), dense.cols())) * scale;
  const auto& R = qr.matrixQR();
  Index rank = 0;
  for (Index k = 0; k < std::min(R.rows(), R.cols()); ++k)
    if (std::abs(R(k, k)) > tol) ++rank;
  if (rank == 0) {
    q_dense_.resize(rows_, 0);
    return;
  }
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows_, rank);
  if (q_indicator_.cols() > 0) q -= q_indicator_ * (q_indicator_.transpose() * q);
  Eigen::HouseholderQR<MatrixXd> reortho(q);
  q_dense_ = reortho.householderQ() * MatrixXd::Identity(rows_, rank);
}

MatrixXd Annihilator::coefficients(const MatrixXd& A) const
{
  MatrixXd c(rank(), A.cols());
  if (q_indicator_.cols() > 0) c.topRows(q_indicator_.cols()) = q_indicator_.transpose() * A;
  if (q_dense_.cols() > 0) c.bottomRows(q_dense_.cols()) = q_dense_.transpose() * A;
  return c;
}

MatrixXd Annihilator::coefficients(const SparseMatrix& A) const
{
  MatrixXd c(rank(), A.cols());
  if (q_indicator_.cols() > 0)
    c.topRows(q_indicator_.cols()) = MatrixXd(SparseMatrix(q_indicator_.transpose() * A));
  if (q_dense_.cols() > 0) c.bottomRows(q_dense_.cols()) = (A.transpose() * q_dense_).transpose();
  return c;
}

MatrixXd Annihilator::apply(const MatrixXd& A) const
{
  if (A.rows() != rows_) throw DimensionMismatch("annihilator applied to a matrix with wrong row count");
  MatrixXd out = A;
  if (q_indicator_.cols() > 0) out -= q_indicator_ * (q_indicator_.transpose() * A);
  if (q_dense_.cols() > 0) out -= q_dense_ * (q_dense_.transpose() * A);
  return out;
}

MatrixXd Annihilator::apply(const SparseMatrix& A) const
{
  if (A.rows() != rows_) throw DimensionMismatch("annihilator applied to a matrix with wrong row count");
  MatrixXd out = MatrixXd(A);
  if (rank() == 0) return out;
  const MatrixXd c = coefficients(A);
  if (q_indicator_.cols() > 0) out -= q_indicator_ * c.topRows(q_indicator_.cols());
  if (q_dense_.cols() > 0) out -= q_dense_ * c.bottomRows(q_dense_.cols());
  return out;
}

VectorXd Annihilator::apply(const VectorXd& v) const
{
  if (v.size() != rows_) throw DimensionMismatch("annihilator applied to a vector of wrong length");
  VectorXd out = v;
  if (q_indicator_.cols() > 0) out -= q_indicator_ * (q_indicator_.transpose() * v);
  if (q_dense_.cols() > 0) out -= q_dense_ * (q_dense_.transpose() * v);
  return out;
}

MatrixXd Annihilator::basis() const
{
  MatrixXd q(rows_, rank());
  if (q_indicator_.cols() > 0) q.leftCols(q_indicator_.cols()) = MatrixXd(q_indicator_);
  if (q_dense_.cols() > 0) q.rightCols(q_dense_.cols()) = q_dense_;
  return q;
}

Annihilator make_annihilator(const StackedDesign& design)
{
  if (design.D.cols() == 0 && !design.has_fe_extra()) return Annihilator(design.num_rows);
  return Annihilator(design.D, MatrixXd(design.fe_extra));
}

}  // namespace peerpanel
