#include "peerpanel/identification.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "peerpanel/errors.hpp"

namespace peerpanel {

namespace {

SparseMatrix hstack(std::initializer_list<const SparseMatrix*> blocks)
{
  Index rows = -1, cols = 0, nnz = 0;
  for (const auto* b : blocks) {
    if (rows < 0) rows = b->rows();
    if (b->rows() != rows) throw DimensionMismatch("hstack row counts differ");
    cols += b->cols();
    nnz += b->nonZeros();
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nnz));
  Index offset = 0;
  for (const auto* b : blocks) {
    for (Index r = 0; r < b->rows(); ++r)
      for (SparseMatrix::InnerIterator it(*b, r); it; ++it) t.emplace_back(r, offset + it.col(), it.value());
    offset += b->cols();
  }
  SparseMatrix out(std::max<Index>(rows, 0), cols);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

MatrixXd fixed_columns(const StackedDesign& d)
{
  MatrixXd X(d.num_rows, d.D.cols() + d.fe_extra.cols());
  if (d.D.cols() > 0) X.leftCols(d.D.cols()) = MatrixXd(d.D);
  if (d.fe_extra.cols() > 0) X.rightCols(d.fe_extra.cols()) = MatrixXd(d.fe_extra);
  return X;
}

bool every_row_sums_to_one(const SparseMatrix& G, double tol)
{
  for (Index r = 0; r < G.rows(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(G, r); it; ++it) s += it.value();
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

std::string fmt(double x)
{
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string rank_text(const std::string& what, const RankInfo& r)
{
  return what + " = " + std::to_string(r.rank) + " (threshold " + fmt(r.threshold) +
         ", kept sigma " + fmt(r.sigma_above) + ", dropped sigma " + fmt(r.sigma_below) + ", " +
         r.method + ")";
}

// Residual of the least-squares fit of mu on the columns of M.
double ls_residual(const MatrixXd& M, const VectorXd& mu, VectorXd* coef = nullptr)
{
  if (M.cols() == 0) {
    if (coef) coef->resize(0);
    return mu.norm();
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(M);
  VectorXd c = qr.solve(mu);
  const double r = (M * c - mu).norm();
  if (coef) *coef = std::move(c);
  return r;
}

double sparse_max_abs(const SparseMatrix& A)
{
  double m = 0.0;
  for (Index r = 0; r < A.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

std::string to_string(Verdict v)
{
  switch (v) {
    case Verdict::identified: return "identified";
    case Verdict::not_identified: return "not_identified";
    case Verdict::generically_identified: return "generically_identified";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::not_evaluated: return "not_evaluated";
  }
  return "not_evaluated";
}

Cor2Result check_cor2(const StackedDesign& design, const std::optional<VectorXd>& mu_alpha)
{
  Cor2Result out;
  const Index N = design.num_individuals;
  const SparseMatrix S = hstack({&design.J, &design.G, &design.D, &design.fe_extra});
  out.rank = projected_rank(Annihilator(design.num_rows), S);
  out.expected_rank = 2 * N + design.D.cols() + design.fe_extra.cols() - 1;
  out.rows_sum_to_one = every_row_sums_to_one(design.G, 1e-10);
  if (mu_alpha) {
    if (mu_alpha->size() != N) throw DimensionMismatch("mu_alpha length");
    const double scale = mu_alpha->cwiseAbs().maxCoeff();
    out.mu_varies = scale > 0.0 && (mu_alpha->maxCoeff() - mu_alpha->minCoeff()) > 1e-8 * scale;
  }
  std::string r = rank_text("rank[J,G,D]", out.rank) + ", required " + std::to_string(out.expected_rank);
  if (!out.rows_sum_to_one) {
    out.verdict = Verdict::inconclusive;
    out.evidence = "G iota != iota on some row; the rank condition does not apply. " + r;
  } else if (out.rank.rank != out.expected_rank) {
    out.verdict = Verdict::not_identified;
    out.evidence = r;
  } else if (out.mu_varies.has_value()) {
    out.verdict = *out.mu_varies ? Verdict::identified : Verdict::not_identified;
    out.evidence = r + (*out.mu_varies ? "; mu_alpha not constant"
                                       : "; mu_alpha constant: only (1 + rho) mu_alpha is identifiable");
  } else {
    out.verdict = Verdict::generically_identified;
    out.evidence = r + "; holds whenever mu_alpha is not constant";
  }
  return out;
}

Cor3Result check_cor3(const StackedDesign& design, const Annihilator& W)
{
  Cor3Result out;
  const SparseMatrix S = hstack({&design.J, &design.G});
  out.rank = projected_rank(W, S);
  out.required = design.num_individuals + 1;
  out.verdict = out.rank.rank >= out.required ? Verdict::generically_identified : Verdict::not_identified;
  out.evidence = rank_text("rank[WJ,WG]", out.rank) + ", required " + std::to_string(out.required);
  return out;
}

Cor3Result check_cor3(const StackedDesign& design)
{
  return check_cor3(design, make_annihilator(design));
}

Prop1Result check_prop1(const StackedDesign& design, const VectorXd& mu, const Prop1Options& opts)
{
  const Index N = design.num_individuals;
  if (mu.size() != N) throw DimensionMismatch("mu_alpha length");
  if (!mu.allFinite()) throw NonFinite("mu_alpha");
  Prop1Result out;
  const Annihilator W = make_annihilator(design);
  const MatrixXd A = W.apply(MatrixXd(hstack({&design.J, &design.G})));
  out.null_basis = null_space(A, RankPolicy(), &out.rank);
  const MatrixXd B1 = out.null_basis.topRows(N);
  const MatrixXd B2 = out.null_basis.bottomRows(N);
  out.tolerance = 1e-8 * std::max(1.0, mu.norm());

  auto residual = [&](double lambda) { return ls_residual(lambda * B1 + B2, mu); };

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * opts.grid_half + 1));
  const Index h = opts.grid_half;
  for (Index k = h - 1; k >= 0; --k) {
    const double e = opts.log_min + (opts.log_max - opts.log_min) * k / std::max<Index>(h - 1, 1);
    grid.push_back(-std::pow(10.0, e));
  }
  grid.push_back(0.0);
  for (Index k = 0; k < h; ++k) {
    const double e = opts.log_min + (opts.log_max - opts.log_min) * k / std::max<Index>(h - 1, 1);
    grid.push_back(std::pow(10.0, e));
  }
  std::vector<std::pair<double, double>> evaluated;  // (lambda, r)
  std::vector<double> r(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    r[k] = residual(grid[k]);
    evaluated.emplace_back(grid[k], r[k]);
  }

  // Golden-section refinement around the smallest local minima.
  std::vector<std::size_t> minima;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const bool left = k == 0 || r[k] <= r[k - 1];
    const bool right = k + 1 == grid.size() || r[k] <= r[k + 1];
    if (left && right) minima.push_back(k);
  }
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
  if (static_cast<Index>(minima.size()) > opts.refine_minima) minima.resize(static_cast<std::size_t>(opts.refine_minima));
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t k : minima) {
    double a = grid[k == 0 ? 0 : k - 1];
    double b = grid[std::min(k + 1, grid.size() - 1)];
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = residual(x1), f2 = residual(x2);
    for (int it = 0; it < 80 && (b - a) > 1e-14 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = residual(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = residual(x2);
      }
    }
    evaluated.emplace_back(x1, f1);
    evaluated.emplace_back(x2, f2);
  }

  auto best = std::min_element(evaluated.begin(), evaluated.end(),
                               [](const auto& x, const auto& y) { return x.second < y.second; });
  out.lambda = best->first;
  out.min_residual = best->second;

  std::ostringstream ev;
  ev << "null space dimension " << out.null_basis.cols() << ", min residual " << fmt(out.min_residual)
     << " at lambda " << fmt(out.lambda) << ", tolerance " << fmt(out.tolerance);
  if (out.min_residual > 10.0 * out.tolerance) {
    out.verdict = Verdict::identified;
    out.evidence = ev.str();
    return out;
  }
  if (out.min_residual > out.tolerance) {
    out.verdict = Verdict::inconclusive;
    out.evidence = ev.str() + "; residual within a factor 10 of the tolerance";
    return out;
  }
  out.verdict = Verdict::not_identified;

  // Witness: pick a feasible lambda away from -rho so that s = rho + lambda != 0.
  const double rho = opts.rho;
  const double gap = 1e-3 * std::max(1.0, std::abs(rho));
  double lambda = out.lambda;
  double best_r = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& [l, rl] : evaluated) {
    if (rl > out.tolerance || std::abs(l + rho) < gap) continue;
    const bool moderate = std::abs(l) <= 1e3;
    const bool best_moderate = found && std::abs(lambda) <= 1e3;
    if (!found || (moderate && !best_moderate) || (moderate == best_moderate && rl < best_r)) {
      lambda = l;
      best_r = rl;
      found = true;
    }
  }
  if (mu.norm() == 0.0) {
    out.has_witness = true;
    out.rho_bar = rho + 1.0;
    out.mu_bar = VectorXd::Zero(N);
    out.v1 = VectorXd::Zero(N);
    out.v2 = VectorXd::Zero(N);
    out.gamma_shift = VectorXd::Zero(design.D.cols() + design.fe_extra.cols());
    out.evidence = ev.str() + "; mu_alpha = 0 gives the same mean for every rho";
    return out;
  }
  if (!found) {
    out.evidence = ev.str() + "; the only feasible lambda equals -rho, no distinct witness";
    return out;
  }
  VectorXd c;
  ls_residual(lambda * B1 + B2, mu, &c);
  const VectorXd v = out.null_basis * c;
  out.v1 = v.head(N);
  out.v2 = v.tail(N);
  const double s = rho + lambda;
  out.rho_bar = -lambda;
  out.mu_bar = mu - s * out.v1;
  const VectorXd shift = s * (design.J * out.v1 + design.G * out.v2);
  const MatrixXd X = fixed_columns(design);
  if (X.cols() > 0)
    out.gamma_shift = X.completeOrthogonalDecomposition().solve(shift);
  else
    out.gamma_shift.resize(0);
  out.has_witness = true;
  out.evidence = ev.str() + "; witness rho_bar = " + fmt(out.rho_bar);
  return out;
}

void require_endogenous_assumptions(const StackedDesign& design)
{
  for (Index r = 0; r < design.num_rows; ++r) {
    double s = 0.0, mass = 0.0;
    for (SparseMatrix::InnerIterator it(design.G, r); it; ++it) {
      s += it.value();
      mass += std::abs(it.value());
    }
    if (mass != 0.0 && std::abs(s - 1.0) > 1e-10) {
      const auto& o = design.row_map[r];
      throw AssumptionViolation("row of individual " + std::to_string(o.individual + 1) + " in period " +
                                std::to_string(o.period + 1) + " sums to " + fmt(s));
    }
  }
  if (!within_group_only(design, 0.0))
    throw AssumptionViolation("the network links individuals in different groups");
}

EndoResult check_endo_generic(const StackedDesign& design, const Annihilator& W)
{
  require_endogenous_assumptions(design);
  EndoResult out;
  const SparseMatrix S = hstack({&design.J, &design.G, &design.H});
  out.rank = projected_rank(W, S);
  out.required = 2 * design.num_individuals + 1;
  out.h_equals_g = sparse_max_abs(SparseMatrix(design.H - design.G)) <= 1e-12;
  out.verdict = out.rank.rank >= out.required ? Verdict::generically_identified : Verdict::not_identified;
  out.evidence = rank_text("rank[WJ,WG,WH]", out.rank) + ", required " + std::to_string(out.required);
  if (out.h_equals_g) {
    out.verdict = Verdict::not_identified;
    out.evidence += "; H = G, so only (psi + rho) / (1 - psi) is identifiable";
  }
  return out;
}

EndoResult check_endo_generic(const StackedDesign& design)
{
  return check_endo_generic(design, make_annihilator(design));
}

std::vector<MatrixXd> prop2y_matrices(const StackedDesign& design, const Annihilator& W)
{
  const Index R = design.num_rows;
  const MatrixXd Q = W.basis();
  MatrixXd Wd = MatrixXd::Identity(R, R);
  if (Q.cols() > 0) Wd.noalias() -= Q * Q.transpose();
  const MatrixXd P = W.apply(design.J);
  const MatrixXd G = W.apply(design.G);
  const MatrixXd WF = W.apply(design.F);
  const MatrixXd WFW = W.apply(MatrixXd(WF.transpose())).transpose();
  std::vector<MatrixXd> mats;
  mats.push_back(Wd);
  mats.push_back(P * P.transpose());
  mats.push_back(P * G.transpose() + G * P.transpose());
  mats.push_back(G * G.transpose());
  mats.push_back(WFW);
  return mats;
}

Prop2Result check_prop2y_lim(const StackedDesign& design, const Annihilator& W, Index dense_limit)
{
  if (design.network_kind != NetworkKind::lim)
    throw WrongNetworkKind("the variance check applies to linear-in-means networks, got " +
                           to_string(design.network_kind));
  Prop2Result out;
  const std::vector<Index> all = {0, 1, 2, 3, 4};
  if (design.num_rows <= dense_limit) {
    out.route = "dense";
    out.independence = maximal_linear_independence(prop2y_matrices(design, W), all);
  } else {
    out.route = "gram";
    const MatrixXd Q = W.basis();
    const MatrixXd P = W.apply(design.J);
    const MatrixXd G = W.apply(design.G);
    const MatrixXd PP = P.transpose() * P, PG = P.transpose() * G, GG = G.transpose() * G;
    // Low-rank terms of W(.)W as (A, B) pairs meaning W A B' W, with 0 = J, 1 = G.
    using Terms = std::vector<std::pair<int, int>>;
    const std::vector<Terms> low = {{}, {{0, 0}}, {{0, 1}, {1, 0}}, {{1, 1}}, {}};
    auto g = [&](int a, int b) -> MatrixXd {
      if (a == 0 && b == 0) return PP;
      if (a == 0 && b == 1) return PG;
      if (a == 1 && b == 0) return PG.transpose();
      return GG;
    };
    const MatrixXd* cols[2] = {&P, &G};
    const SparseMatrix& F = design.F;
    const double trW = static_cast<double>(design.num_rows - W.rank());
    const MatrixXd FQ = F * Q;
    const MatrixXd QtF = (F.transpose() * Q).transpose();
    const MatrixXd QtFQ = Q.transpose() * FQ;
    double trF = 0.0, fro2F = 0.0;
    for (Index r = 0; r < F.rows(); ++r)
      for (SparseMatrix::InnerIterator it(F, r); it; ++it) {
        if (it.col() == r) trF += it.value();
        fro2F += it.value() * it.value();
      }
    MatrixXd gram(5, 5);
    for (int x = 0; x < 5; ++x)
      for (int y = x; y < 5; ++y) {
        double v = 0.0;
        if (x == 0 && y == 0) {
          v = trW;
        } else if (x == 0 && y == 4) {
          v = trF - QtFQ.trace();
        } else if (x == 4 && y == 4) {
          v = fro2F - QtF.squaredNorm() - FQ.squaredNorm() + QtFQ.squaredNorm();
        } else if (x == 0) {
          for (auto [c, d] : low[y]) v += g(d, c).trace();
        } else if (y == 4) {
          // tr((WA)' F (WB)) summed over the terms of x.
          for (auto [a, b] : low[x]) v += cols[a]->cwiseProduct(F * (*cols[b])).sum();
        } else {
          for (auto [a, b] : low[x])
            for (auto [c, d] : low[y]) v += g(c, a).cwiseProduct(g(d, b)).sum();
        }
        gram(x, y) = gram(y, x) = v;
      }
    out.independence = maximal_linear_independence_gram(gram, all);
  }
  const auto& ind = out.independence.independent;
  const bool all_independent = std::all_of(ind.begin(), ind.end(), [](bool b) { return b; });
  out.verdict = all_independent ? Verdict::identified : Verdict::not_identified;
  std::ostringstream ev;
  ev << "rank of the vectorized system " << out.independence.rank.rank << " of 5 (" << out.route
     << "), smallest normalized singular value "
     << fmt(out.independence.rank.singular_values.size() ? out.independence.rank.singular_values.minCoeff() : 0.0);
  out.evidence = ev.str();
  return out;
}

Prop2Result check_prop2y_lim(const StackedDesign& design)
{
  return check_prop2y_lim(design, make_annihilator(design));
}

namespace {

struct SplitRows {
  std::vector<Index> in, out;
};

SplitRows split_rows(const StackedDesign& design, Index m)
{
  SplitRows s;
  for (Index r = 0; r < design.num_rows; ++r)
    (design.row_map[r].group == m ? s.in : s.out).push_back(r);
  return s;
}

MatrixXd take_rows(const MatrixXd& A, const std::vector<Index>& rows)
{
  MatrixXd out(static_cast<Index>(rows.size()), A.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = A.row(rows[k]);
  return out;
}

// Blocks as sums of (X, Y) pairs meaning X_m Y_{-m}', with 0 = WJ, 1 = WG, 2 = WH.
const std::vector<std::vector<std::pair<int, int>>>& prop3_terms()
{
  static const std::vector<std::vector<std::pair<int, int>>> terms = {
      {{0, 0}}, {{0, 1}, {1, 0}}, {{0, 2}, {2, 0}}, {{1, 2}, {2, 1}}, {{1, 1}}, {{2, 2}}};
  return terms;
}

}  // namespace

std::vector<MatrixXd> prop3y_blocks(const StackedDesign& design, const Annihilator& W, Index m)
{
  const SplitRows s = split_rows(design, m);
  const MatrixXd full[3] = {W.apply(design.J), W.apply(design.G), W.apply(design.H)};
  MatrixXd in[3], out[3];
  for (int k = 0; k < 3; ++k) {
    in[k] = take_rows(full[k], s.in);
    out[k] = take_rows(full[k], s.out);
  }
  std::vector<MatrixXd> blocks;
  for (const auto& terms : prop3_terms()) {
    MatrixXd b = MatrixXd::Zero(static_cast<Index>(s.in.size()), static_cast<Index>(s.out.size()));
    for (auto [x, y] : terms) b.noalias() += in[x] * out[y].transpose();
    blocks.push_back(std::move(b));
  }
  return blocks;
}

Prop3Result check_prop3y(const StackedDesign& design, const Annihilator& W,
                         const std::vector<Index>& groups, std::optional<double> psi_plus_rho,
                         double dense_limit)
{
  require_endogenous_assumptions(design);
  Prop3Result out;
  out.psi_plus_rho = psi_plus_rho;
  std::vector<Index> scan = groups;
  if (scan.empty())
    for (Index m = 0; m < design.num_groups; ++m) scan.push_back(m);

  const MatrixXd full[3] = {W.apply(design.J), W.apply(design.G), W.apply(design.H)};
  MatrixXd gram_full[3][3];
  bool have_full_gram = false;
  const std::vector<Index> probe = {0, 1, 2};

  for (Index m : scan) {
    if (m < 0 || m >= design.num_groups) throw DimensionMismatch("group filter out of range");
    const SplitRows s = split_rows(design, m);
    Prop3Group pg;
    pg.group = m;
    pg.rows_in = static_cast<Index>(s.in.size());
    if (s.in.empty() || s.out.empty()) {
      pg.zero_blocks = true;
      pg.independent.assign(3, false);
      out.groups.push_back(pg);
      continue;
    }
    MatrixXd in[3], rest[3];
    for (int k = 0; k < 3; ++k) in[k] = take_rows(full[k], s.in);
    IndependenceResult res;
    const double cells = static_cast<double>(s.in.size()) * static_cast<double>(s.out.size());
    if (cells <= dense_limit) {
      for (int k = 0; k < 3; ++k) rest[k] = take_rows(full[k], s.out);
      std::vector<MatrixXd> blocks;
      double biggest = 0.0;
      for (const auto& terms : prop3_terms()) {
        MatrixXd b = MatrixXd::Zero(pg.rows_in, static_cast<Index>(s.out.size()));
        for (auto [x, y] : terms) b.noalias() += in[x] * rest[y].transpose();
        biggest = std::max(biggest, b.cwiseAbs().maxCoeff());
        blocks.push_back(std::move(b));
      }
      pg.zero_blocks = biggest <= 1e-12;
      res = maximal_linear_independence(blocks, probe);
    } else {
      if (!have_full_gram) {
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) gram_full[a][b] = full[a].transpose() * full[b];
        have_full_gram = true;
      }
      MatrixXd gin[3][3], gout[3][3];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          gin[a][b] = in[a].transpose() * in[b];
          gout[a][b] = gram_full[a][b] - gin[a][b];
        }
      const auto& T = prop3_terms();
      MatrixXd gram(6, 6);
      for (int x = 0; x < 6; ++x)
        for (int y = x; y < 6; ++y) {
          double v = 0.0;
          for (auto [a, b] : T[x])
            for (auto [c, d] : T[y]) v += gin[a][c].cwiseProduct(gout[b][d]).sum();
          gram(x, y) = gram(y, x) = v;
        }
      pg.zero_blocks = gram.diagonal().maxCoeff() <= 1e-24;
      res = maximal_linear_independence_gram(gram, probe);
    }
    pg.independent = res.independent;
    pg.passes = !pg.zero_blocks &&
                std::all_of(res.independent.begin(), res.independent.end(), [](bool b) { return b; });
    out.groups.push_back(pg);
  }

  const auto passing = std::count_if(out.groups.begin(), out.groups.end(), [](const Prop3Group& g) { return g.passes; });
  std::ostringstream ev;
  ev << passing << " of " << out.groups.size() << " groups pass";
  if (psi_plus_rho && std::abs(*psi_plus_rho) <= 1e-12) {
    out.verdict = Verdict::not_identified;
    ev << "; psi + rho = 0: the endogenous effect offsets the contextual effect";
  } else {
    out.verdict = passing > 0 ? Verdict::identified : Verdict::not_identified;
    if (!psi_plus_rho) ev << "; assumes psi + rho != 0";
  }
  out.evidence = ev.str();
  return out;
}

Prop3Result check_prop3y(const StackedDesign& design)
{
  return check_prop3y(design, make_annihilator(design));
}

Verdict IdentificationReport::overall() const
{
  if (prop1) return prop1->verdict;
  if (cor2.verdict == Verdict::identified) return Verdict::identified;
  return cor3.verdict;
}

IdentificationReport identify(const StackedDesign& design, const IdentifyOptions& opts)
{
  IdentificationReport rep;
  rep.num_individuals = design.num_individuals;
  rep.num_groups = design.num_groups;
  rep.num_periods = design.num_periods;
  rep.num_rows = design.num_rows;
  const Annihilator W = make_annihilator(design);
  rep.cor2 = check_cor2(design, opts.mu_alpha);
  rep.cor3 = check_cor3(design, W);
  rep.nullspace_dim = 2 * design.num_individuals - rep.cor3.rank.rank;
  for (const auto& w : design.warnings) rep.notes.push_back(w);

  if (opts.mu_alpha) {
    if (design.num_individuals <= opts.prop1_max_individuals) {
      Prop1Options p;
      p.rho = opts.rho;
      rep.prop1 = check_prop1(design, *opts.mu_alpha, p);
    } else {
      rep.notes.push_back("mean-restriction scan skipped: more than " +
                          std::to_string(opts.prop1_max_individuals) + " individuals");
    }
  }
  if (opts.endogenous) {
    try {
      rep.endo = check_endo_generic(design, W);
      if (design.network_kind == NetworkKind::lim)
        rep.prop2y = check_prop2y_lim(design, W);
      else
        rep.prop3y = check_prop3y(design, W, opts.groups, opts.psi_plus_rho);
    } catch (const AssumptionViolation& e) {
      rep.notes.push_back(std::string("endogenous checks not evaluated: ") + e.what());
    }
  }
  return rep;
}

}  // namespace peerpanel
