#pragma once

#include <string>
#include <vector>

#include "peerpanel/networks.hpp"
#include "peerpanel/panel.hpp"
#include "peerpanel/types.hpp"

namespace peerpanel {

enum class FixedEffects {
  group,         // gamma_m, last group dropped
  group_period,  // gamma_mt for every nonempty (m, t) cell, last cell dropped
};

// The stacked algebra object consumed by the identification checks and the
// estimators. R is the number of observation rows (NT when balanced).
struct StackedDesign {
  Index num_rows = 0;
  Index num_individuals = 0;
  Index num_groups = 0;
  Index num_periods = 0;
  FixedEffects fe_mode = FixedEffects::group;
  NetworkKind network_kind = NetworkKind::custom;

  SparseMatrix J;  // R x N individual indicators
  SparseMatrix C;  // R x M group indicators (R x cells in group-period mode)
  SparseMatrix D;  // C without its last column
  SparseMatrix G;  // R x N stacked network rows
  SparseMatrix F;  // R x R block diagonal network over observed rows
  SparseMatrix H;  // R x N stacked rows of G_t squared
  SparseMatrix fe_extra;  // R x (T-1) period dummies (first period dropped); may have 0 columns

  // Per-period diagonal blocks of F and their first row.
  std::vector<SparseMatrix> period_blocks;
  std::vector<Index> period_offset;

  std::vector<Observation> row_map;
  // (group, period) of each column of C in group-period mode.
  std::vector<std::pair<Index, Index>> cell_of_column;

  std::vector<std::string> warnings;

  bool has_fe_extra() const { return fe_extra.cols() > 0; }
};

// Stack the panel and network by period. Throws DimensionMismatch when the
// network does not match the panel. Group-period mode always records a
// warning: under linear-in-means the parameters are not identifiable there.
StackedDesign stack_design(const PanelIndex& panel, const Network& net,
                           FixedEffects fe_mode = FixedEffects::group,
                           bool period_dummies = false);

// Row sums of G equal one on every nonempty row.
bool rows_stochastic(const SparseMatrix& G, double tol = 1e-12);

// G_ijt = 0 whenever g(i,t) != g(j,t).
bool within_group_only(const StackedDesign& design, double tol = 0.0);

struct ModelParams {
  double rho = 0.0;
  double psi = 0.0;
  VectorXd alpha;
  VectorXd gamma;  // length = design.D.cols()
  VectorXd beta;   // own covariates
  VectorXd rho1;   // peer covariates
  VectorXd mu_alpha;
  VectorXd mu_gamma;
};

// y = (J + rho G) alpha + D gamma + X beta + F X rho1 + eps, and with psi != 0
// y = (I - psi F)^{-1} [ ... ], solved block by block with a sparse LU.
// Covariate terms are used only when X has columns.
//
// Throws DimensionMismatch and SpectralRadiusViolation (|psi| >= 1 or a
// singular block).
VectorXd apply_params(const StackedDesign& design, const ModelParams& params,
                      const VectorXd& eps, const MatrixXd& X = MatrixXd());

// Multiply by F and solve with (I - psi F) using the stored period blocks.
VectorXd apply_F(const StackedDesign& design, const VectorXd& v);
VectorXd solve_endogenous(const StackedDesign& design, double psi, const VectorXd& rhs);

}  // namespace peerpanel
