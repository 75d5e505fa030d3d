#include "peerpanel/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "peerpanel/errors.hpp"

namespace peerpanel {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const MatrixXd& A)
{
  if (!A.allFinite()) throw NonFinite("matrix has NaN or infinite entries");
}

// Eigen 3.4.0's divide-and-conquer SVD can index out of range during
// deflation on matrices with exact zeros; the Jacobi SVD is used below
// the size where its cubic cost matters.
constexpr Index kJacobiLimit = 800;

template <int Options>
void svd_of(const MatrixXd& A, VectorXd& sv, MatrixXd* V)
{
  if (std::min(A.rows(), A.cols()) <= kJacobiLimit) {
    Eigen::JacobiSVD<MatrixXd> svd(A, Options);
    sv = svd.singularValues();
    if (V) *V = svd.matrixV();
  } else {
    Eigen::BDCSVD<MatrixXd> svd(A, Options);
    sv = svd.singularValues();
    if (V) *V = svd.matrixV();
  }
}

MatrixXd square_factor(const MatrixXd& A)
{
  Eigen::HouseholderQR<MatrixXd> qr(A);
  return qr.matrixQR().topRows(A.cols()).triangularView<Eigen::Upper>();
}

double cut(const VectorXd& sv, Index rows, Index cols, RankPolicy policy)
{
  if (policy.kind == RankPolicy::Kind::absolute) return policy.value;
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  return static_cast<double>(std::max(rows, cols)) * smax * kEps * policy.value;
}

RankInfo summarize(VectorXd sv, double threshold, std::string method)
{
  RankInfo info;
  info.threshold = threshold;
  info.method = std::move(method);
  Index r = 0;
  while (r < sv.size() && sv[r] > threshold) ++r;
  info.rank = r;
  info.sigma_above = r > 0 ? sv[r - 1] : std::numeric_limits<double>::quiet_NaN();
  info.sigma_below = r < sv.size() ? sv[r] : 0.0;
  info.singular_values = std::move(sv);
  return info;
}

}  // namespace

VectorXd singular_values(const MatrixXd& A)
{
  require_finite(A);
  if (A.size() == 0) return VectorXd();
  VectorXd sv;
  if (A.rows() > A.cols())
    svd_of<0>(square_factor(A), sv, nullptr);
  else if (A.cols() > A.rows())
    svd_of<0>(square_factor(A.transpose()), sv, nullptr);
  else
    svd_of<0>(A, sv, nullptr);
  return sv;
}

RankInfo rank_of(const MatrixXd& A, RankPolicy policy)
{
  VectorXd sv = singular_values(A);
  const double thr = cut(sv, A.rows(), A.cols(), policy);
  return summarize(std::move(sv), thr, "svd");
}

RankInfo rank_from_gram(const MatrixXd& gram, Index rows, RankPolicy policy)
{
  require_finite(gram);
  const Index n = gram.rows();
  if (n == 0) return summarize(VectorXd(), 0.0, "gram-eigen");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  VectorXd lambda = es.eigenvalues().reverse();
  VectorXd sv = lambda.cwiseMax(0.0).cwiseSqrt();
  double thr;
  if (policy.kind == RankPolicy::Kind::absolute) {
    thr = policy.value;
  } else {
    const double lam_cut =
        static_cast<double>(std::max(rows, n)) * std::max(lambda[0], 0.0) * kEps * policy.value;
    thr = std::sqrt(lam_cut);
  }
  return summarize(std::move(sv), thr, "gram-eigen");
}

RankInfo projected_rank(const Annihilator& W, const SparseMatrix& S, RankPolicy policy,
                        double dense_limit)
{
  if (static_cast<double>(S.rows()) * static_cast<double>(S.cols()) <= dense_limit)
    return rank_of(W.apply(S), policy);
  MatrixXd gram = MatrixXd(SparseMatrix(S.transpose() * S));
  if (W.rank() > 0) {
    const MatrixXd c = W.coefficients(S);
    gram.noalias() -= c.transpose() * c;
  }
  return rank_from_gram(gram, S.rows(), policy);
}

MatrixXd null_space(const MatrixXd& A, RankPolicy policy, RankInfo* info)
{
  require_finite(A);
  const Index c = A.cols();
  if (c == 0) return MatrixXd(0, 0);
  VectorXd sv;
  MatrixXd V;
  if (A.rows() >= c)
    svd_of<Eigen::ComputeFullV>(square_factor(A), sv, &V);
  else
    svd_of<Eigen::ComputeFullV>(A, sv, &V);
  const double thr = cut(sv, A.rows(), A.cols(), policy);
  RankInfo r = summarize(sv, thr, "svd");
  MatrixXd basis = V.rightCols(c - r.rank);
  if (info) *info = std::move(r);
  return basis;
}

IndependenceResult maximal_linear_independence(const std::vector<MatrixXd>& mats,
                                               const std::vector<Index>& probe, double tol)
{
  if (mats.empty()) throw ShapeMismatch("empty collection");
  const Index rows = mats.front().rows();
  const Index cols = mats.front().cols();
  const Index L = static_cast<Index>(mats.size());
  MatrixXd V(rows * cols, L);
  for (Index l = 0; l < L; ++l) {
    const MatrixXd& A = mats[l];
    if (A.rows() != rows || A.cols() != cols)
      throw ShapeMismatch("matrix " + std::to_string(l + 1) + " is " + std::to_string(A.rows()) +
                          "x" + std::to_string(A.cols()) + ", expected " + std::to_string(rows) +
                          "x" + std::to_string(cols));
    V.col(l) = A.reshaped();
    const double n = V.col(l).norm();
    if (n > 0.0) V.col(l) /= n;
  }
  IndependenceResult out;
  out.kernel = null_space(V, RankPolicy(), &out.rank);
  for (Index l : probe) {
    if (l < 0 || l >= L) throw ShapeMismatch("probe index out of range");
    out.independent.push_back(out.kernel.cols() == 0 ||
                              out.kernel.row(l).cwiseAbs().maxCoeff() < tol);
  }
  return out;
}

IndependenceResult maximal_linear_independence_gram(const MatrixXd& gram,
                                                    const std::vector<Index>& probe,
                                                    double eig_tol, double tol)
{
  require_finite(gram);
  const Index L = gram.rows();
  if (L == 0 || gram.cols() != L) throw ShapeMismatch("Gram matrix must be square and nonempty");
  VectorXd scale(L);
  for (Index l = 0; l < L; ++l) scale[l] = gram(l, l) > 0.0 ? 1.0 / std::sqrt(gram(l, l)) : 0.0;
  const MatrixXd normalized = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(normalized);
  const VectorXd& lambda = es.eigenvalues();  // ascending
  const double lam_max = std::max(lambda[L - 1], 0.0);
  Index k = 0;
  while (k < L && lambda[k] <= eig_tol * std::max(lam_max, 1.0)) ++k;

  IndependenceResult out;
  out.kernel = es.eigenvectors().leftCols(k);
  VectorXd sv = lambda.reverse().cwiseMax(0.0).cwiseSqrt();
  out.rank = summarize(std::move(sv), std::sqrt(eig_tol * std::max(lam_max, 1.0)), "gram-eigen");
  for (Index l : probe) {
    if (l < 0 || l >= L) throw ShapeMismatch("probe index out of range");
    out.independent.push_back(k == 0 || out.kernel.row(l).cwiseAbs().maxCoeff() < tol);
  }
  return out;
}

}  // namespace peerpanel
