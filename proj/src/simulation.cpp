#include "peerpanel/simulation.hpp"

#include <cmath>
#include <numeric>

#include "peerpanel/errors.hpp"
#include "peerpanel/rng.hpp"

namespace peerpanel {

namespace {

std::uint64_t stage(Stage s) { return static_cast<std::uint64_t>(s); }

double sd_of(const VectorXd& v)
{
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

void McConfig::validate() const
{
  if (N < 1 || M < 1 || T < 1) throw ConfigViolation("N, M and T must be positive");
  if (N != 5 * M) throw ConfigViolation("initial groups of five need N = 5M, got N=" + std::to_string(N) +
                                        ", M=" + std::to_string(M));
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigViolation("p must lie in [0, 1]");
  if (!(eps_variance > 0.0) || !std::isfinite(eps_variance)) throw ConfigViolation("eps_variance must be positive");
  if (replications < 1) throw ConfigViolation("replications must be >= 1");
  if (!std::isfinite(rho_true)) throw ConfigViolation("rho_true must be finite");
  if (!(std::abs(psi_true) < 1.0)) throw ConfigViolation("|psi_true| must be < 1");
  if (links_per_person < 1) throw ConfigViolation("links_per_person must be >= 1");
  fit_options().validate();
}

McConfig McConfig::desk()
{
  McConfig c;
  c.N = 100;
  c.M = 20;
  c.replications = 100;
  return c;
}

McConfig McConfig::full() { return McConfig(); }

FitOptions McConfig::fit_options() const
{
  FitOptions o;
  o.rho_lo = rho_lo;
  o.rho_hi = rho_hi;
  o.grid_points = grid_points;
  o.refine_tol = refine_tol;
  o.include_group_fe = correlated_effects;
  o.include_period_fe = false;
  o.bootstrap_reps = 0;
  o.force = true;
  o.seed = seed;
  return o;
}

std::uint64_t replication_seed(std::uint64_t seed, Index replication)
{
  return Rng::derive(seed, {static_cast<std::uint64_t>(replication)});
}

MobilityPattern simulate_pattern(const McConfig& cfg, std::uint64_t rep_seed)
{
  if (cfg.N != 5 * cfg.M) throw ConfigViolation("initial groups of five need N = 5M");
  if (cfg.T < 1) throw ConfigViolation("T must be positive");
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw ConfigViolation("p must lie in [0, 1]");
  Rng rng = Rng::stream(rep_seed, {stage(Stage::pattern)});
  const Index N = cfg.N;
  std::vector<Index> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index k = N - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(static_cast<std::uint64_t>(k + 1))]);

  MobilityPattern out;
  out.moves.assign(static_cast<std::size_t>(N), 0);
  std::vector<std::vector<Index>> g(static_cast<std::size_t>(cfg.T), std::vector<Index>(static_cast<std::size_t>(N)));
  for (Index k = 0; k < N; ++k) g[0][perm[k]] = k / 5;
  for (Index t = 1; t < cfg.T; ++t) {
    Index movers = 0;
    for (Index i = 0; i < N; ++i) {
      g[t][i] = g[t - 1][i];
      if (!rng.bernoulli(cfg.p)) continue;
      const Index dest = static_cast<Index>(rng.below(static_cast<std::uint64_t>(cfg.M)));
      if (dest == g[t][i]) ++out.self_moves;
      g[t][i] = dest;
      ++out.moves[i];
      ++movers;
    }
    out.mover_fraction.push_back(static_cast<double>(movers) / static_cast<double>(N));
  }
  out.panel = PanelIndex::from_assignment(std::move(g), cfg.M);
  return out;
}

AlphaDraw draw_alpha(const MobilityPattern& pattern, std::uint64_t rep_seed, double eta_sd)
{
  const Index T = pattern.panel.num_periods();
  if (T < 2) throw ConfigViolation("alpha design needs T >= 2");
  const Index N = pattern.panel.num_individuals();
  Rng rng = Rng::stream(rep_seed, {stage(Stage::alpha)});
  AlphaDraw d;
  d.alpha.resize(N);
  d.move_share.resize(N);
  for (Index i = 0; i < N; ++i) {
    d.move_share[i] = static_cast<double>(pattern.moves[i]) / static_cast<double>(T - 1);
    d.alpha[i] = 1.0 + d.move_share[i] + eta_sd * rng.normal();
  }
  return d;
}

VectorXd draw_gamma(const PanelIndex& panel, const VectorXd& alpha, GammaMode mode)
{
  const Index M = panel.num_groups();
  if (mode == GammaMode::zero) return VectorXd::Zero(M);
  if (alpha.size() != panel.num_individuals()) throw DimensionMismatch("alpha length");
  VectorXd sum = VectorXd::Zero(M);
  VectorXd count = VectorXd::Zero(M);
  for (const Observation& o : panel.observations()) {
    sum[o.group] += alpha[o.individual];
    count[o.group] += 1.0;
  }
  for (Index m = 0; m < M; ++m) {
    if (count[m] == 0.0) throw EmptyGroup("group " + std::to_string(m + 1) + " is never occupied");
    sum[m] /= count[m];
  }
  return sum;
}

VectorXd simulate_outcomes(const StackedDesign& design, const VectorXd& alpha, const VectorXd& gamma,
                           const McConfig& cfg, std::uint64_t rep_seed)
{
  if (design.fe_mode != FixedEffects::group) throw ConfigViolation("simulation uses time-invariant group effects");
  if (gamma.size() != design.C.cols()) throw DimensionMismatch("gamma needs one entry per group");
  Rng rng = Rng::stream(rep_seed, {stage(Stage::outcome)});
  const double sd = std::sqrt(cfg.eps_variance);
  const Index M = gamma.size();
  VectorXd eps(design.num_rows);
  for (Index r = 0; r < design.num_rows; ++r) eps[r] = sd * rng.normal();
  ModelParams params;
  params.rho = cfg.rho_true;
  params.psi = cfg.psi_true;
  params.alpha = alpha;
  // C gamma = D (gamma_{1..M-1} - gamma_M) + gamma_M, rows of C summing to one.
  const double last = M > 0 ? gamma[M - 1] : 0.0;
  params.gamma = gamma.head(M > 0 ? M - 1 : 0).array() - last;
  eps.array() += last;
  return apply_params(design, params, eps);
}

Network build_network(const PanelIndex& panel, NetworkKind kind, std::uint64_t rep_seed, Index links_per_person)
{
  switch (kind) {
    case NetworkKind::lim: return lim(panel);
    case NetworkKind::liom: return liom(panel);
    case NetworkKind::pliom: return pliom(panel);
    case NetworkKind::social: return social(panel, rep_seed, links_per_person);
    case NetworkKind::custom: break;
  }
  throw ConfigViolation("custom networks cannot be generated");
}

SimulatedDataset simulate_dataset(const McConfig& cfg, Index replication)
{
  SimulatedDataset d;
  d.rep_seed = replication_seed(cfg.seed, replication);
  d.pattern = simulate_pattern(cfg, d.rep_seed);
  d.alpha = draw_alpha(d.pattern, d.rep_seed);
  d.gamma = draw_gamma(d.pattern.panel, d.alpha.alpha,
                       cfg.correlated_effects ? GammaMode::group_mean : GammaMode::zero);
  d.network = build_network(d.pattern.panel, cfg.network_kind, d.rep_seed, cfg.links_per_person);
  d.design = stack_design(d.pattern.panel, d.network, FixedEffects::group, false);
  d.y = simulate_outcomes(d.design, d.alpha.alpha, d.gamma, cfg, d.rep_seed);
  return d;
}

CellStats summarize_cell(const std::vector<double>& values, Index failures)
{
  CellStats s;
  s.count = static_cast<Index>(values.size());
  s.failures = failures;
  if (values.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  return s;
}

McResult run_monte_carlo(const McConfig& cfg)
{
  cfg.validate();
  McResult res;
  res.config = cfg;
  res.records.resize(static_cast<std::size_t>(cfg.replications));
  const FitOptions opts = cfg.fit_options();

#pragma omp parallel for schedule(dynamic)
  for (Index r = 0; r < cfg.replications; ++r) {
    ReplicationRecord& rec = res.records[r];
    rec.replication = r;
    try {
      const SimulatedDataset d = simulate_dataset(cfg, r);
      const double moved = std::accumulate(d.pattern.mover_fraction.begin(), d.pattern.mover_fraction.end(), 0.0);
      rec.mover_rate = d.pattern.mover_fraction.empty() ? 0.0 : moved / static_cast<double>(d.pattern.mover_fraction.size());
      rec.self_moves = d.pattern.self_moves;
      const Cor3Result c3 = check_cor3(d.design);
      rec.cor3 = c3.verdict;
      rec.cor3_rank = c3.rank.rank;
      const VectorXd peer = cfg.rho_true * (d.design.G * d.alpha.alpha);
      const double sy = sd_of(d.y);
      rec.effect_ratio = sy > 0.0 ? sd_of(peer) / sy : 0.0;
      try {
        const EstimationResult fit = fit_nls(d.y, d.design, opts);
        rec.rho_nls = fit.rho_hat;
        rec.flags = fit.flags;
        rec.nls_ok = std::isfinite(fit.rho_hat);
      } catch (const Error& e) {
        rec.error = e.what();
      }
      if (cfg.observed_alpha_benchmark) {
        try {
          rec.rho_ols = fit_observed_alpha(d.y, d.design, d.alpha.alpha, opts).rho_hat;
          rec.ols_ok = std::isfinite(rec.rho_ols);
        } catch (const Error& e) {
          if (rec.error.empty()) rec.error = e.what();
        }
      }
    } catch (const Error& e) {
      rec.error = e.what();
    }
  }

  std::vector<double> nls, ols;
  double mover = 0.0, effect = 0.0;
  for (const ReplicationRecord& rec : res.records) {
    if (rec.nls_ok) nls.push_back(rec.rho_nls);
    if (rec.ols_ok) ols.push_back(rec.rho_ols);
    if (!passes(rec.cor3)) ++res.cor3_failures;
    mover += rec.mover_rate;
    effect += rec.effect_ratio;
  }
  const Index reps = cfg.replications;
  res.nls = summarize_cell(nls, reps - static_cast<Index>(nls.size()));
  res.ols = summarize_cell(ols, cfg.observed_alpha_benchmark ? reps - static_cast<Index>(ols.size()) : 0);
  res.mean_mover_rate = mover / static_cast<double>(reps);
  res.mean_effect_ratio = effect / static_cast<double>(reps);
  return res;
}

}  // namespace peerpanel
