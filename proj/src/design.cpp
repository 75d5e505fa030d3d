#include "peerpanel/design.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <map>

#include "peerpanel/errors.hpp"

namespace peerpanel {

namespace {

SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& t)
{
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

StackedDesign stack_design(const PanelIndex& panel, const Network& net, FixedEffects fe_mode,
                           bool period_dummies)
{
  const Index N = panel.num_individuals();
  const Index T = panel.num_periods();
  const Index R = panel.num_rows();
  if (net.num_individuals != N || net.num_periods() != T)
    throw DimensionMismatch("network is " + std::to_string(net.num_individuals) + " individuals x " +
                            std::to_string(net.num_periods()) + " periods, panel is " +
                            std::to_string(N) + " x " + std::to_string(T));
  for (const auto& Gt : net.per_period)
    if (Gt.rows() != N || Gt.cols() != N)
      throw DimensionMismatch("per-period network block is not N x N");

  StackedDesign d;
  d.num_rows = R;
  d.num_individuals = N;
  d.num_groups = panel.num_groups();
  d.num_periods = T;
  d.fe_mode = fe_mode;
  d.network_kind = net.kind;
  d.row_map = panel.observations();
  d.period_offset.resize(static_cast<std::size_t>(T + 1));
  for (Index t = 0; t <= T; ++t) d.period_offset[t] = t < T ? panel.period_begin(t) : R;

  std::vector<Triplet> tj, tc, tg, th, tf, te;
  tj.reserve(static_cast<std::size_t>(R));
  tc.reserve(static_cast<std::size_t>(R));

  // Column of C for each observation.
  std::vector<Index> c_col(static_cast<std::size_t>(R));
  Index c_cols = 0;
  if (fe_mode == FixedEffects::group) {
    c_cols = panel.num_groups();
    for (Index r = 0; r < R; ++r) c_col[r] = panel.row(r).group;
  } else {
    std::map<std::pair<Index, Index>, Index> cell;  // (t, m) -> column
    for (Index r = 0; r < R; ++r) {
      const auto& o = panel.row(r);
      cell.emplace(std::make_pair(o.period, o.group), 0);
    }
    for (auto& [key, col] : cell) {
      col = c_cols++;
      d.cell_of_column.emplace_back(key.second, key.first);
    }
    for (Index r = 0; r < R; ++r) {
      const auto& o = panel.row(r);
      c_col[r] = cell.at({o.period, o.group});
    }
    d.warnings.push_back(
        net.kind == NetworkKind::lim
            ? "group-period fixed effects with a linear-in-means network: the peer effect varies only "
              "at the group-period level and is not identifiable"
            : "group-period fixed effects: peer effects may be nearly collinear with the cell effects");
  }

  bool dropped_links = false;
  d.period_blocks.resize(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    const SparseMatrix& Gt = net.per_period[t];
    const SparseMatrix Gt2 = (Gt * Gt).pruned();
    const Index begin = panel.period_begin(t);
    const Index n_t = panel.period_rows(t);
    std::vector<Triplet> block;
    for (Index r = begin; r < begin + n_t; ++r) {
      const Index i = panel.row(r).individual;
      tj.emplace_back(r, i, 1.0);
      tc.emplace_back(r, c_col[r], 1.0);
      if (period_dummies && t > 0) te.emplace_back(r, t - 1, 1.0);
      for (SparseMatrix::InnerIterator it(Gt, i); it; ++it) {
        if (it.value() == 0.0) continue;
        tg.emplace_back(r, it.col(), it.value());
        const Index rj = panel.row_of(it.col(), t);
        if (rj < 0) {
          dropped_links = true;
          continue;
        }
        tf.emplace_back(r, rj, it.value());
        block.emplace_back(r - begin, rj - begin, it.value());
      }
      for (SparseMatrix::InnerIterator it(Gt2, i); it; ++it)
        if (it.value() != 0.0) th.emplace_back(r, it.col(), it.value());
    }
    d.period_blocks[t] = from_triplets(n_t, n_t, block);
  }
  if (dropped_links)
    d.warnings.push_back(
        "links to individuals not observed in the same period are kept in G but dropped from F");

  d.J = from_triplets(R, N, tj);
  d.C = from_triplets(R, c_cols, tc);
  std::vector<Triplet> td;
  for (const auto& t : tc)
    if (t.col() < c_cols - 1) td.push_back(t);
  d.D = from_triplets(R, std::max<Index>(c_cols - 1, 0), td);
  d.G = from_triplets(R, N, tg);
  d.H = from_triplets(R, N, th);
  d.F = from_triplets(R, R, tf);
  d.fe_extra = from_triplets(R, period_dummies ? std::max<Index>(T - 1, 0) : 0, te);
  return d;
}

bool rows_stochastic(const SparseMatrix& G, double tol)
{
  for (Index r = 0; r < G.rows(); ++r) {
    double sum = 0.0, mass = 0.0;
    for (SparseMatrix::InnerIterator it(G, r); it; ++it) {
      sum += it.value();
      mass += std::abs(it.value());
    }
    if (mass == 0.0) continue;
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

bool within_group_only(const StackedDesign& design, double tol)
{
  const Index N = design.num_individuals;
  std::vector<std::vector<Index>> group(static_cast<std::size_t>(design.num_periods),
                                        std::vector<Index>(static_cast<std::size_t>(N), -1));
  for (const auto& o : design.row_map) group[o.period][o.individual] = o.group;
  for (Index r = 0; r < design.num_rows; ++r) {
    const auto& o = design.row_map[r];
    for (SparseMatrix::InnerIterator it(design.G, r); it; ++it)
      if (std::abs(it.value()) > tol && group[o.period][it.col()] != o.group) return false;
  }
  return true;
}

VectorXd apply_F(const StackedDesign& design, const VectorXd& v)
{
  return design.F * v;
}

VectorXd solve_endogenous(const StackedDesign& design, double psi, const VectorXd& rhs)
{
  if (!(std::abs(psi) < 1.0))
    throw SpectralRadiusViolation("|psi| must be < 1, got " + std::to_string(psi));
  if (rhs.size() != design.num_rows) throw DimensionMismatch("right-hand side length");
  VectorXd y(design.num_rows);
  for (std::size_t t = 0; t < design.period_blocks.size(); ++t) {
    const Index begin = design.period_offset[t];
    const Index n = design.period_offset[t + 1] - begin;
    if (n == 0) continue;
    Eigen::SparseMatrix<double> A(n, n);
    A.setIdentity();
    A -= psi * Eigen::SparseMatrix<double>(design.period_blocks[t]);
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw SpectralRadiusViolation("I - psi G_t is singular in period " + std::to_string(t + 1));
    VectorXd yt = lu.solve(rhs.segment(begin, n));
    if (lu.info() != Eigen::Success || !yt.allFinite())
      throw SpectralRadiusViolation("reduced-form solve failed in period " + std::to_string(t + 1));
    y.segment(begin, n) = yt;
  }
  return y;
}

VectorXd apply_params(const StackedDesign& design, const ModelParams& params, const VectorXd& eps,
                      const MatrixXd& X)
{
  const Index R = design.num_rows;
  if (params.alpha.size() != design.num_individuals)
    throw DimensionMismatch("alpha has length " + std::to_string(params.alpha.size()) +
                            ", expected " + std::to_string(design.num_individuals));
  if (params.gamma.size() != design.D.cols() && params.gamma.size() != 0)
    throw DimensionMismatch("gamma has length " + std::to_string(params.gamma.size()) +
                            ", expected " + std::to_string(design.D.cols()));
  if (eps.size() != R) throw DimensionMismatch("eps length");

  VectorXd y = design.J * params.alpha + params.rho * (design.G * params.alpha) + eps;
  if (params.gamma.size() > 0) y += design.D * params.gamma;
  if (X.cols() > 0) {
    if (X.rows() != R) throw DimensionMismatch("X rows");
    if (params.beta.size() == X.cols()) y += X * params.beta;
    if (params.rho1.size() == X.cols()) y += design.F * (X * params.rho1);
  }
  if (params.psi != 0.0) y = solve_endogenous(design, params.psi, y);
  return y;
}

}  // namespace peerpanel
