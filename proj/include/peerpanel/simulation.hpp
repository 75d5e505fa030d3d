#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peerpanel/design.hpp"
#include "peerpanel/estimation.hpp"
#include "peerpanel/identification.hpp"
#include "peerpanel/networks.hpp"
#include "peerpanel/panel.hpp"

namespace peerpanel {

struct McConfig {
  Index N = 700;
  Index M = 140;
  Index T = 15;
  double p = 0.03;
  double rho_true = 0.5;
  double psi_true = 0.0;
  NetworkKind network_kind = NetworkKind::lim;
  bool correlated_effects = false;
  double eps_variance = 0.5;
  Index replications = 500;
  std::uint64_t seed = 1;
  Index links_per_person = 2;
  bool observed_alpha_benchmark = true;
  // Estimator settings; include_group_fe follows correlated_effects, force
  // is always on (verdicts are recorded instead) and bootstrap is off.
  double rho_lo = -2.0;
  double rho_hi = 2.0;
  Index grid_points = 201;
  double refine_tol = 1e-9;

  // Throws ConfigViolation.
  void validate() const;

  static McConfig desk();  // N = 100, M = 20, 100 replications
  static McConfig full();  // N = 700, M = 140, 500 replications

  FitOptions fit_options() const;
};

// Per-replication key; every stage stream is (replication_seed, stage, ...).
std::uint64_t replication_seed(std::uint64_t seed, Index replication);

struct MobilityPattern {
  PanelIndex panel;
  std::vector<Index> moves;               // per individual, over periods 2..T
  std::vector<double> mover_fraction;     // per period 2..T, self-moves included
  Index self_moves = 0;                   // moves that redrew the current group
};

// Period 1: a random permutation cut into groups of five. Later periods:
// each individual moves with probability p to a group drawn uniformly over
// all M (which may be the current one). Throws ConfigViolation unless N = 5M.
MobilityPattern simulate_pattern(const McConfig& cfg, std::uint64_t rep_seed);

struct AlphaDraw {
  VectorXd alpha;
  VectorXd move_share;  // W_i = moves / (T - 1)
};

// alpha_i = 1 + W_i + eta_i, eta_i ~ N(0, eta_sd^2). Throws ConfigViolation
// when T < 2.
AlphaDraw draw_alpha(const MobilityPattern& pattern, std::uint64_t rep_seed, double eta_sd = 1.0);

enum class GammaMode { zero, group_mean };

// Group-mean mode averages alpha over all (member, period) pairs of each
// group. Throws EmptyGroup when a group is never occupied.
VectorXd draw_gamma(const PanelIndex& panel, const VectorXd& alpha, GammaMode mode);

// y from the stacked model with eps ~ N(0, eps_variance) drawn from stream
// (rep_seed, outcome). gamma has one entry per group (C columns); it is
// re-expressed on D by differencing against the last group, whose level is
// added to every row.
VectorXd simulate_outcomes(const StackedDesign& design, const VectorXd& alpha, const VectorXd& gamma,
                           const McConfig& cfg, std::uint64_t rep_seed);

Network build_network(const PanelIndex& panel, NetworkKind kind, std::uint64_t rep_seed, Index links_per_person);

struct SimulatedDataset {
  std::uint64_t rep_seed = 0;
  MobilityPattern pattern;
  AlphaDraw alpha;
  VectorXd gamma;
  Network network;
  StackedDesign design;
  VectorXd y;
};

SimulatedDataset simulate_dataset(const McConfig& cfg, Index replication);

struct ReplicationRecord {
  Index replication = 0;
  bool nls_ok = false;
  double rho_nls = 0.0;
  std::vector<std::string> flags;
  bool ols_ok = false;
  double rho_ols = 0.0;
  Verdict cor3 = Verdict::not_evaluated;  // with the design's group columns
  Index cor3_rank = -1;
  double mover_rate = 0.0;
  Index self_moves = 0;
  // sd(rho G alpha) / sd(y): response of y to one sd of peer heterogeneity.
  double effect_ratio = 0.0;
  std::string error;
};

struct CellStats {
  Index count = 0;
  Index failures = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd (denominator count - 1)
};

struct McResult {
  McConfig config;
  std::vector<ReplicationRecord> records;  // ordered by replication
  CellStats nls;
  CellStats ols;
  Index cor3_failures = 0;
  double mean_mover_rate = 0.0;
  double mean_effect_ratio = 0.0;
};

CellStats summarize_cell(const std::vector<double>& values, Index failures);

// Replications run in parallel when OpenMP is available; the reduction is in
// replication order, so results do not depend on the thread count.
McResult run_monte_carlo(const McConfig& cfg);

}  // namespace peerpanel
