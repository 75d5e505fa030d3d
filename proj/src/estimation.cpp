#include "peerpanel/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "peerpanel/errors.hpp"
#include "peerpanel/linalg.hpp"
#include "peerpanel/rng.hpp"

namespace peerpanel {

namespace {

SparseMatrix hstack2(const SparseMatrix& a, const SparseMatrix& b)
{
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() + b.nonZeros()));
  for (Index r = 0; r < a.rows(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) t.emplace_back(r, it.col(), it.value());
    for (SparseMatrix::InnerIterator it(b, r); it; ++it) t.emplace_back(r, a.cols() + it.col(), it.value());
  }
  SparseMatrix out(a.rows(), a.cols() + b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

std::string fmt(double x)
{
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Solve K x = b for symmetric PSD K; pseudo-inverse when K is (near) singular.
VectorXd psd_solve(const MatrixXd& K, const VectorXd& b, bool& deficient)
{
  deficient = false;
  if (K.rows() == 0) return VectorXd();
  Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) {
    const auto d = llt.matrixLLT().diagonal();
    const double scale = K.diagonal().maxCoeff();
    if (d.minCoeff() * d.minCoeff() > 1e-13 * scale) return llt.solve(b);
  }
  deficient = true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
  const VectorXd& lam = es.eigenvalues();
  const double cut = 1e-12 * std::max(lam.maxCoeff(), 0.0);
  VectorXd proj = es.eigenvectors().transpose() * b;
  for (Index k = 0; k < lam.size(); ++k) proj[k] = lam[k] > cut ? proj[k] / lam[k] : 0.0;
  return es.eigenvectors() * proj;
}

double sample_sd(const std::vector<double>& x)
{
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

void FitOptions::validate() const
{
  if (!std::isfinite(rho_lo) || !std::isfinite(rho_hi) || !(rho_lo < rho_hi))
    throw ConfigViolation("rho interval must be finite and nonempty");
  if (grid_points < 3) throw ConfigViolation("grid_points must be >= 3");
  if (!(refine_tol > 0.0)) throw ConfigViolation("refine_tol must be positive");
  if (bootstrap_reps < 0) throw ConfigViolation("bootstrap_reps must be >= 0");
  if (!X.allFinite()) throw NonFinite("covariates");
}

bool EstimationResult::has_flag(const std::string& prefix) const
{
  return std::any_of(flags.begin(), flags.end(),
                     [&](const std::string& f) { return f.rfind(prefix, 0) == 0; });
}

MatrixXd estimator_fixed_columns(const StackedDesign& design, const FitOptions& opts)
{
  const Index R = design.num_rows;
  if (opts.X.cols() > 0 && opts.X.rows() != R) throw DimensionMismatch("covariate rows");
  const Index d = opts.include_group_fe ? design.D.cols() : 0;
  const Index e = opts.include_period_fe ? design.fe_extra.cols() : 0;
  const Index k = opts.X.cols();
  const Index kf = opts.peer_covariates ? k : 0;
  MatrixXd out(R, d + e + k + kf);
  if (d) out.leftCols(d) = MatrixXd(design.D);
  if (e) out.middleCols(d, e) = MatrixXd(design.fe_extra);
  if (k) out.middleCols(d + e, k) = opts.X;
  if (kf) out.rightCols(kf) = design.F * opts.X;
  return out;
}

Annihilator estimator_annihilator(const StackedDesign& design, const FitOptions& opts)
{
  const Index R = design.num_rows;
  if (opts.X.cols() > 0 && opts.X.rows() != R) throw DimensionMismatch("covariate rows");
  const Index e = opts.include_period_fe ? design.fe_extra.cols() : 0;
  const Index k = opts.X.cols();
  const Index kf = opts.peer_covariates ? k : 0;
  MatrixXd extra(R, e + k + kf);
  if (e) extra.leftCols(e) = MatrixXd(design.fe_extra);
  if (k) extra.middleCols(e, k) = opts.X;
  if (kf) extra.rightCols(kf) = design.F * opts.X;
  const SparseMatrix indicators = opts.include_group_fe ? design.D : SparseMatrix(R, 0);
  if (indicators.cols() == 0 && extra.cols() == 0) return Annihilator(R);
  return Annihilator(indicators, extra);
}

ProfilePoint profile_ssr(double rho, const VectorXd& y, const StackedDesign& design, const FitOptions& opts)
{
  if (y.size() != design.num_rows) throw DimensionMismatch("outcome length");
  if (!y.allFinite()) throw NonFinite("outcome");
  const MatrixXd fixed = estimator_fixed_columns(design, opts);
  const Index N = design.num_individuals;
  MatrixXd Z(design.num_rows, N + fixed.cols());
  Z.leftCols(N) = MatrixXd(design.J) + rho * MatrixXd(design.G);
  Z.rightCols(fixed.cols()) = fixed;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Z);
  ProfilePoint p;
  p.coef = cod.solve(y);
  p.ssr = (y - Z * p.coef).squaredNorm();
  p.deficiency = Z.cols() - cod.rank();
  return p;
}

ProfileObjective::ProfileObjective(const StackedDesign& design, const Annihilator& W)
    : design_(design), W_(W), n_(design.num_individuals)
{
  const SparseMatrix& J = design.J;
  const SparseMatrix& G = design.G;
  MatrixXd AA = MatrixXd(SparseMatrix(J.transpose() * J));
  MatrixXd AB = MatrixXd(SparseMatrix(J.transpose() * G));
  MatrixXd BB = MatrixXd(SparseMatrix(G.transpose() * G));
  if (W.rank() > 0) {
    const MatrixXd cj = W.coefficients(J);
    const MatrixXd cg = W.coefficients(G);
    AA.noalias() -= cj.transpose() * cj;
    AB.noalias() -= cj.transpose() * cg;
    BB.noalias() -= cg.transpose() * cg;
  }
  // Directions invisible to both A and B are dropped; when S is safely
  // positive definite the basis is the identity and no projection is done.
  const MatrixXd S = AA + BB;
  Eigen::LLT<MatrixXd> llt(S);
  bool full = false;
  if (llt.info() == Eigen::Success && n_ > 0) {
    const auto d = llt.matrixLLT().diagonal();
    full = d.minCoeff() * d.minCoeff() > 1e-10 * S.diagonal().maxCoeff();
  }
  if (full) {
    basis_ = MatrixXd::Identity(n_, n_);
    AA_ = std::move(AA);
    AB_ = std::move(AB);
    BB_ = std::move(BB);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    const VectorXd& lam = es.eigenvalues();
    const double cut = 1e-10 * std::max(lam.size() ? lam.maxCoeff() : 0.0, 0.0);
    Index first = 0;
    while (first < lam.size() && lam[first] <= cut) ++first;
    basis_ = es.eigenvectors().rightCols(n_ - first);
    AA_ = basis_.transpose() * AA * basis_;
    AB_ = basis_.transpose() * AB * basis_;
    BB_ = basis_.transpose() * BB * basis_;
  }
}

void ProfileObjective::set_outcome(const VectorXd& y)
{
  if (y.size() != design_.num_rows) throw DimensionMismatch("outcome length");
  if (!y.allFinite()) throw NonFinite("outcome");
  w_ = W_.apply(y);
  // w lies in the range of W, so (WJ)'w = J'w.
  Aw_ = basis_.transpose() * (design_.J.transpose() * w_);
  Bw_ = basis_.transpose() * (design_.G.transpose() * w_);
}

ProfileObjective::Eval ProfileObjective::evaluate(double rho) const
{
  Eval e;
  const MatrixXd K = AA_ + rho * (AB_ + AB_.transpose()) + (rho * rho) * BB_;
  const VectorXd rhs = Aw_ + rho * Bw_;
  const VectorXd a = psd_solve(K, rhs, e.deficient);
  e.alpha = basis_ * a;
  const VectorXd ga = design_.G * e.alpha;
  const VectorXd r = w_ - W_.apply(VectorXd(design_.J * e.alpha + rho * ga));
  e.ssr = r.squaredNorm();
  e.deriv = -2.0 * r.dot(ga);
  return e;
}

SearchResult minimize_profile(const ProfileObjective& obj, const FitOptions& opts)
{
  SearchResult s;
  const double lo = opts.rho_lo, hi = opts.rho_hi;
  const Index n = opts.grid_points;
  std::vector<double> rho(static_cast<std::size_t>(n)), ssr(static_cast<std::size_t>(n));
  double best_rho = lo;
  ProfileObjective::Eval best;
  best.ssr = std::numeric_limits<double>::infinity();
  auto consider = [&](double x, ProfileObjective::Eval&& e) {
    ++s.evaluations;
    if (e.ssr < best.ssr) {
      best = std::move(e);
      best_rho = x;
    }
  };
  Index kmin = 0;
  for (Index k = 0; k < n; ++k) {
    rho[k] = k + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    ProfileObjective::Eval e = obj.evaluate(rho[k]);
    ssr[k] = e.ssr;
    s.grid.emplace_back(rho[k], e.ssr);
    if (ssr[k] < ssr[kmin]) kmin = k;
    consider(rho[k], std::move(e));
  }
  const double smax = *std::max_element(ssr.begin(), ssr.end());
  const double smin = ssr[kmin];
  // Judged at the median so that isolated singular points (rho = -1 under
  // linear-in-means) do not hide a profile that is flat elsewhere.
  std::vector<double> sorted = ssr;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[static_cast<std::size_t>(n / 2)];
  s.flat = smax <= 0.0 || median - smin <= 1e-10 * std::max(median, obj.outcome_ssr());

  // Golden section on the bracket around the grid minimum.
  double a = rho[std::max<Index>(kmin - 1, 0)];
  double b = rho[std::min<Index>(kmin + 1, n - 1)];
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  auto e1 = obj.evaluate(x1), e2 = obj.evaluate(x2);
  double f1 = e1.ssr, f2 = e2.ssr;
  consider(x1, std::move(e1));
  consider(x2, std::move(e2));
  while (b - a > opts.refine_tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      auto e = obj.evaluate(x1);
      f1 = e.ssr;
      consider(x1, std::move(e));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      auto e = obj.evaluate(x2);
      f2 = e.ssr;
      consider(x2, std::move(e));
    }
  }

  // Secant steps on the derivative: comparisons of SSR alone stall once the
  // differences reach rounding level.
  const double bl = rho[std::max<Index>(kmin - 1, 0)];
  const double bh = rho[std::min<Index>(kmin + 1, n - 1)];
  double xa = best_rho, da = best.deriv;
  double xb = std::clamp(best_rho + std::max(opts.refine_tol, 1e-7), bl, bh);
  if (xb == xa) xb = std::clamp(best_rho - std::max(opts.refine_tol, 1e-7), bl, bh);
  if (xb != xa) {
    auto eb = obj.evaluate(xb);
    double db = eb.deriv;
    consider(xb, std::move(eb));
    for (int it = 0; it < 20; ++it) {
      if (db == da) break;
      const double xn = xb - db * (xb - xa) / (db - da);
      if (!std::isfinite(xn) || xn < bl || xn > bh || std::abs(xn - xb) < 1e-15 * std::max(1.0, std::abs(xb)))
        break;
      auto en = obj.evaluate(xn);
      xa = xb;
      da = db;
      xb = xn;
      db = en.deriv;
      consider(xn, std::move(en));
    }
  }

  s.rho = best_rho;
  s.at = std::move(best);
  const double edge = 1e-6 * (hi - lo);
  s.boundary = (kmin == 0 || kmin == n - 1) && (s.rho - lo < edge || hi - s.rho < edge);
  return s;
}

namespace {

BootstrapResult bootstrap_impl(ProfileObjective& obj, const VectorXd& fitted, const VectorXd& resid,
                               const StackedDesign& design, const FitOptions& opts)
{
  BootstrapResult out;
  for (Index b = 0; b < opts.bootstrap_reps; ++b) {
    try {
      const VectorXd w = bootstrap_weights(design, opts.bootstrap_cluster, opts.seed, b);
      obj.set_outcome(fitted + w.cwiseProduct(resid));
      const SearchResult s = minimize_profile(obj, opts);
      if (!std::isfinite(s.rho)) throw NonFinite("bootstrap estimate");
      out.draws.push_back(s.rho);
    } catch (const Error&) {
      ++out.failures;
    }
  }
  out.se = sample_sd(out.draws);
  return out;
}

// Rank of [X, FX] after partialling out J and the fixed columns, from the
// Schur complement of the Gram matrix of [WJ, WX]. J'WJ = J'J - (Q'J)'(Q'J)
// with J'J diagonal, so no R x N matrix is formed.
Index covariate_rank(const StackedDesign& design, const Annihilator& W, const MatrixXd& XF)
{
  const MatrixXd WX = W.apply(XF);
  const MatrixXd QJ = W.coefficients(design.J);
  const VectorXd counts = design.J.transpose() * VectorXd::Ones(design.num_rows);
  MatrixXd gjj = -QJ.transpose() * QJ;
  gjj.diagonal() += counts;
  const MatrixXd gjx = design.J.transpose() * WX;
  MatrixXd S = WX.transpose() * WX;
  const VectorXd scale = S.diagonal();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gjj);
  const VectorXd& ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  const MatrixXd V = es.eigenvectors().transpose() * gjx;
  for (Index k = 0; k < ev.size(); ++k)
    if (ev[k] > cut) S -= V.row(k).transpose() * V.row(k) / ev[k];

  Index zero = 0;
  VectorXd d(scale.size());
  for (Index k = 0; k < scale.size(); ++k) {
    d[k] = scale[k] > 0.0 ? 1.0 / std::sqrt(scale[k]) : 0.0;
    zero += scale[k] <= 0.0;
  }
  const MatrixXd Sn = d.asDiagonal() * S * d.asDiagonal();
  const VectorXd sv = Eigen::SelfAdjointEigenSolver<MatrixXd>(Sn, Eigen::EigenvaluesOnly).eigenvalues();
  Index r = 0;
  for (Index k = 0; k < sv.size(); ++k) r += sv[k] > 1e-8;
  return std::min(r, XF.cols() - zero);
}

}  // namespace

EstimationResult fit_nls(const VectorXd& y, const StackedDesign& design, const FitOptions& opts)
{
  opts.validate();
  if (y.size() != design.num_rows) throw DimensionMismatch("outcome length");
  if (!y.allFinite()) throw NonFinite("outcome");
  const Index N = design.num_individuals;
  EstimationResult res;

  const Annihilator W = estimator_annihilator(design, opts);
  const RankInfo r = projected_rank(W, hstack2(design.J, design.G));
  res.cor3_rank = r.rank;
  if (r.rank < N + 1) {
    const std::string msg = "rank[WJ,WG] = " + std::to_string(r.rank) + " < N + 1 = " + std::to_string(N + 1);
    if (!opts.force) throw NotIdentifiedRefusal(msg + " (use force to fit anyway)");
    res.flags.push_back("not_identified: " + msg);
  }

  ProfileObjective obj(design, W);
  obj.set_outcome(y);
  SearchResult s = minimize_profile(obj, opts);
  res.rho_hat = s.rho;
  res.alpha_hat = s.at.alpha;
  res.ssr = s.at.ssr;
  res.profile = std::move(s.grid);
  res.evaluations = s.evaluations;
  res.deficiency_dim = obj.common_null_dim();
  if (s.flat) res.flags.push_back("flat_profile: SSR over most of the grid is within 1e-10 of the minimum");
  if (s.boundary) res.flags.push_back("boundary: estimate at the edge of the search interval");
  if (s.at.deficient || res.deficiency_dim > 0)
    res.flags.push_back("rank_deficient: min-norm inner solution, " + std::to_string(res.deficiency_dim) +
                        " alpha direction(s) unseen by the data");

  const VectorXd peer = design.J * res.alpha_hat + res.rho_hat * (design.G * res.alpha_hat);
  const MatrixXd fixed = estimator_fixed_columns(design, opts);
  VectorXd coef = VectorXd::Zero(fixed.cols());
  if (fixed.cols() > 0) coef = fixed.completeOrthogonalDecomposition().solve(y - peer);
  Index at = 0;
  auto take = [&](Index n) {
    VectorXd v = coef.segment(at, n);
    at += n;
    return v;
  };
  res.gamma_hat = take(opts.include_group_fe ? design.D.cols() : 0);
  res.period_fe_hat = take(opts.include_period_fe ? design.fe_extra.cols() : 0);
  res.beta_hat = take(opts.X.cols());
  res.rho1_hat = take(opts.peer_covariates ? opts.X.cols() : 0);
  res.fitted = peer + fixed * coef;
  res.residuals = y - res.fitted;

  if (opts.X.cols() > 0) {
    FitOptions base = opts;
    base.X.resize(0, 0);
    const Annihilator Wd = estimator_annihilator(design, base);
    MatrixXd XF(design.num_rows, opts.X.cols() * (opts.peer_covariates ? 2 : 1));
    XF.leftCols(opts.X.cols()) = opts.X;
    if (opts.peer_covariates) XF.rightCols(opts.X.cols()) = design.F * opts.X;
    const Index rx = covariate_rank(design, Wd, XF);
    if (rx < XF.cols())
      res.flags.push_back("covariates_collinear: [X, FX] has rank " + std::to_string(rx) + " < " +
                          std::to_string(XF.cols()) + " beyond the individual effects and fixed columns");
  }
  // Reported, not enforced: consistency is argued for rho below the smallest group size.
  Index min_size = std::numeric_limits<Index>::max();
  {
    std::vector<std::vector<Index>> count(static_cast<std::size_t>(design.num_periods),
                                          std::vector<Index>(static_cast<std::size_t>(design.num_groups), 0));
    for (const auto& o : design.row_map) ++count[o.period][o.group];
    for (const auto& per : count)
      for (Index c : per)
        if (c > 0) min_size = std::min(min_size, c);
  }
  if (min_size != std::numeric_limits<Index>::max() && res.rho_hat >= static_cast<double>(min_size))
    res.flags.push_back("rho_above_min_group_size: rho_hat = " + fmt(res.rho_hat) + " >= " + std::to_string(min_size));

  if (N >= 2) res.sigma_alpha_hat = sigma_alpha(res.alpha_hat);
  const EffectSizes es = effect_sizes(res.rho_hat, std::isfinite(res.sigma_alpha_hat) ? res.sigma_alpha_hat : 0.0,
                                      design.G);
  res.mean_row_norm = es.mean_row_norm;
  res.avg_row_norm_effect = es.avg_row_norm_effect;
  res.pp_effect = es.pp_effect;

  if (opts.bootstrap_reps > 0) {
    BootstrapResult b = bootstrap_impl(obj, res.fitted, res.residuals, design, opts);
    res.se_rho = b.se;
    res.bootstrap_draws = std::move(b.draws);
    res.bootstrap_failures = b.failures;
  }
  return res;
}

VectorXd bootstrap_weights(const StackedDesign& design, BootstrapCluster cluster, std::uint64_t seed, Index b)
{
  Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(Stage::bootstrap), static_cast<std::uint64_t>(b)});
  VectorXd w(design.num_rows);
  if (cluster == BootstrapCluster::observation) {
    for (Index r = 0; r < design.num_rows; ++r) w[r] = rng.rademacher();
  } else {
    VectorXd per(design.num_individuals);
    for (Index i = 0; i < design.num_individuals; ++i) per[i] = rng.rademacher();
    for (Index r = 0; r < design.num_rows; ++r) w[r] = per[design.row_map[r].individual];
  }
  return w;
}

BootstrapResult wild_bootstrap(const EstimationResult& fit, const StackedDesign& design, const FitOptions& opts)
{
  if (fit.fitted.size() != design.num_rows || fit.residuals.size() != design.num_rows)
    throw DimensionMismatch("fit does not belong to this design");
  const Annihilator W = estimator_annihilator(design, opts);
  ProfileObjective obj(design, W);
  return bootstrap_impl(obj, fit.fitted, fit.residuals, design, opts);
}

double sigma_alpha(const VectorXd& alpha_hat)
{
  if (alpha_hat.size() < 2) throw DegenerateN("need at least two individuals, got " + std::to_string(alpha_hat.size()));
  const double mean = alpha_hat.mean();
  return std::sqrt((alpha_hat.array() - mean).square().sum() / static_cast<double>(alpha_hat.size() - 1));
}

EffectSizes effect_sizes(double rho_hat, double sigma_alpha_hat, const SparseMatrix& G)
{
  EffectSizes e;
  if (G.rows() == 0) return e;
  double total = 0.0;
  for (Index r = 0; r < G.rows(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(G, r); it; ++it) s += it.value() * it.value();
    total += std::sqrt(s);
  }
  e.mean_row_norm = total / static_cast<double>(G.rows());
  e.avg_row_norm_effect = rho_hat * e.mean_row_norm;
  e.pp_effect = e.avg_row_norm_effect * sigma_alpha_hat;
  return e;
}

EffectSizes effect_sizes(double rho_hat, double sigma_alpha_hat, const Network& net, const PanelIndex& panel)
{
  if (net.num_individuals != panel.num_individuals() || net.num_periods() != panel.num_periods())
    throw DimensionMismatch("network does not match the panel");
  std::vector<Triplet> t;
  Index row = 0;
  for (Index p = 0; p < panel.num_periods(); ++p)
    for (Index i = 0; i < panel.num_individuals(); ++i) {
      if (panel.group_of(i, p) < 0) continue;
      for (SparseMatrix::InnerIterator it(net.per_period[p], i); it; ++it) t.emplace_back(row, it.col(), it.value());
      ++row;
    }
  SparseMatrix G(row, panel.num_individuals());
  G.setFromTriplets(t.begin(), t.end());
  return effect_sizes(rho_hat, sigma_alpha_hat, G);
}

EstimationResult fit_observed_alpha(const VectorXd& y, const StackedDesign& design, const VectorXd& alpha_true,
                                    const FitOptions& opts)
{
  if (y.size() != design.num_rows) throw DimensionMismatch("outcome length");
  if (alpha_true.size() != design.num_individuals) throw DimensionMismatch("alpha length");
  if (!y.allFinite() || !alpha_true.allFinite()) throw NonFinite("outcome or alpha");
  // With alpha known, J no longer carries the overall level that the
  // dropped group or period column leaves behind.
  const bool intercept = (opts.include_group_fe && design.D.cols() > 0) ||
                         (opts.include_period_fe && design.fe_extra.cols() > 0);
  MatrixXd fixed = estimator_fixed_columns(design, opts);
  if (intercept) {
    MatrixXd f(design.num_rows, fixed.cols() + 1);
    f.col(0).setOnes();
    f.rightCols(fixed.cols()) = fixed;
    fixed.swap(f);
  }
  const Annihilator W = fixed.cols() > 0 ? Annihilator(SparseMatrix(design.num_rows, 0), fixed)
                                         : Annihilator(design.num_rows);
  const VectorXd x = design.G * alpha_true;
  const VectorXd z = y - design.J * alpha_true;
  const VectorXd wx = W.apply(x);
  const VectorXd wz = W.apply(z);
  const double denom = wx.squaredNorm();
  if (!(denom > 1e-20 * std::max(1.0, x.squaredNorm())))
    throw SingularDesign("G alpha is spanned by the fixed columns");
  EstimationResult res;
  res.rho_hat = wx.dot(wz) / denom;
  res.alpha_hat = alpha_true;
  res.ssr = (wz - res.rho_hat * wx).squaredNorm();
  res.cor3_rank = -1;
  const VectorXd rest = z - res.rho_hat * x;
  VectorXd coef = VectorXd::Zero(fixed.cols());
  if (fixed.cols() > 0) coef = fixed.completeOrthogonalDecomposition().solve(rest);
  Index at = intercept ? 1 : 0;
  auto take = [&](Index n) {
    VectorXd v = coef.segment(at, n);
    at += n;
    return v;
  };
  res.gamma_hat = take(opts.include_group_fe ? design.D.cols() : 0);
  res.period_fe_hat = take(opts.include_period_fe ? design.fe_extra.cols() : 0);
  res.beta_hat = take(opts.X.cols());
  res.rho1_hat = take(opts.peer_covariates ? opts.X.cols() : 0);
  res.fitted = design.J * alpha_true + res.rho_hat * x + fixed * coef;
  res.residuals = y - res.fitted;
  return res;
}

}  // namespace peerpanel
