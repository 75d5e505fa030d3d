#pragma once

#include <optional>
#include <string>
#include <vector>

#include "peerpanel/annihilator.hpp"
#include "peerpanel/design.hpp"
#include "peerpanel/linalg.hpp"

namespace peerpanel {

enum class Verdict { identified, not_identified, generically_identified, inconclusive, not_evaluated };

std::string to_string(Verdict v);

// True for identified and generically_identified.
inline bool passes(Verdict v)
{
  return v == Verdict::identified || v == Verdict::generically_identified;
}

struct Cor2Result {
  Verdict verdict = Verdict::not_evaluated;
  RankInfo rank;             // rank of [J, G, D, fe_extra]
  Index expected_rank = 0;   // 2N + cols(D) + cols(fe_extra) - 1
  bool rows_sum_to_one = false;
  std::optional<bool> mu_varies;
  std::string evidence;
};

// Rank condition for row-stochastic networks. Rows of G must all sum to one
// (tolerance 1e-10); otherwise the condition does not apply and the verdict
// is inconclusive. mu_alpha entries are "different" beyond 1e-8 relative to
// max |mu_alpha|.
Cor2Result check_cor2(const StackedDesign& design,
                      const std::optional<VectorXd>& mu_alpha = std::nullopt);

struct Cor3Result {
  Verdict verdict = Verdict::not_evaluated;
  RankInfo rank;  // rank of [WJ, WG]
  Index required = 0;
  std::string evidence;
};

// generically_identified iff rank([WJ, WG]) >= N + 1, otherwise not_identified.
Cor3Result check_cor3(const StackedDesign& design, const Annihilator& W);
Cor3Result check_cor3(const StackedDesign& design);

struct Prop1Result {
  Verdict verdict = Verdict::not_evaluated;
  MatrixXd null_basis;  // 2N x k, orthonormal
  RankInfo rank;
  double min_residual = 0.0;
  double tolerance = 0.0;
  double lambda = 0.0;  // minimizer of r(lambda)

  // Witness of observational equivalence, filled when not identified:
  // (J + rho G) mu = (J + rho_bar G) mu_bar + [D, fe_extra] gamma_shift.
  bool has_witness = false;
  VectorXd v1, v2;
  double rho_bar = 0.0;
  VectorXd mu_bar;
  VectorXd gamma_shift;
  std::string evidence;
};

struct Prop1Options {
  // Peer effect at which the witness is built; the witness needs
  // rho + lambda != 0.
  double rho = 0.0;
  Index grid_half = 2000;  // points per sign; grid has 2 * grid_half + 1 entries
  double log_min = -6.0;
  double log_max = 6.0;
  Index refine_minima = 5;
};

// Decides whether some v in null([WJ, WG]) and delta_2 != 0 give
// delta_1 v1 + delta_2 v2 = mu_alpha. With delta_2 = 1 the question is
// whether min_c |(lambda B1 + B2) c - mu| vanishes for some lambda, where B
// is an orthonormal null-space basis. Decided by a scan of lambda plus
// golden-section refinement; tolerance 1e-8 * max(1, |mu|), inconclusive in
// (tol, 10 tol).
Prop1Result check_prop1(const StackedDesign& design, const VectorXd& mu_alpha,
                        const Prop1Options& opts = Prop1Options());

struct EndoResult {
  Verdict verdict = Verdict::not_evaluated;
  RankInfo rank;  // rank of [WJ, WG, WH]
  Index required = 0;
  bool h_equals_g = false;
  std::string evidence;
};

// Throws AssumptionViolation unless every row of G sums to one or is empty
// and G has no links across groups.
void require_endogenous_assumptions(const StackedDesign& design);

// generically_identified iff rank([WJ, WG, WH]) >= 2N + 1. When H = G the
// parameters collapse to (psi + rho) / (1 - psi) and the result says so.
EndoResult check_endo_generic(const StackedDesign& design, const Annihilator& W);
EndoResult check_endo_generic(const StackedDesign& design);

struct Prop2Result {
  Verdict verdict = Verdict::not_evaluated;
  IndependenceResult independence;
  std::string route;  // "dense" or "gram"
  std::string evidence;
};

// Linear independence of W, WJJ'W, W(JG'+GJ')W, WGG'W and WFW. The dense
// route vectorizes the R x R products and is used up to `dense_limit`
// rows; above it the Frobenius Gram matrix is assembled from traces.
// Throws WrongNetworkKind unless the network is linear-in-means.
Prop2Result check_prop2y_lim(const StackedDesign& design, const Annihilator& W,
                             Index dense_limit = 300);
Prop2Result check_prop2y_lim(const StackedDesign& design);

// The five R x R matrices of the linear-in-means variance check, dense.
std::vector<MatrixXd> prop2y_matrices(const StackedDesign& design, const Annihilator& W);

struct Prop3Group {
  Index group = 0;
  Index rows_in = 0;
  bool passes = false;
  bool zero_blocks = false;
  std::vector<bool> independent;  // first three blocks
};

struct Prop3Result {
  Verdict verdict = Verdict::not_evaluated;
  std::vector<Prop3Group> groups;
  std::optional<double> psi_plus_rho;
  std::string evidence;
};

// The six blocks E_m W(.)W E_{-m}' for group m, in the order
// JJ', JG'+GJ', JH'+HJ', GH'+HG', GG', HH'.
std::vector<MatrixXd> prop3y_blocks(const StackedDesign& design, const Annihilator& W, Index m);

// Identified iff some group's first three blocks are maximally linearly
// independent of all six. psi + rho != 0 is an assumption; when a value is
// supplied and it is zero the verdict is not_identified. `groups` restricts
// the scan (empty = all groups).
Prop3Result check_prop3y(const StackedDesign& design, const Annihilator& W,
                         const std::vector<Index>& groups = {},
                         std::optional<double> psi_plus_rho = std::nullopt,
                         double dense_limit = 1e6);
Prop3Result check_prop3y(const StackedDesign& design);

struct IdentifyOptions {
  std::optional<VectorXd> mu_alpha;
  double rho = 0.0;
  bool endogenous = false;
  std::vector<Index> groups;
  std::optional<double> psi_plus_rho;
  // Above this many individuals the mean-restriction scan is skipped (its
  // cost grows like N^3 per scan point).
  Index prop1_max_individuals = 400;
};

struct IdentificationReport {
  Index num_individuals = 0;
  Index num_groups = 0;
  Index num_periods = 0;
  Index num_rows = 0;
  Cor2Result cor2;
  Cor3Result cor3;
  std::optional<Prop1Result> prop1;
  std::optional<EndoResult> endo;
  std::optional<Prop2Result> prop2y;
  std::optional<Prop3Result> prop3y;
  Index nullspace_dim = 0;  // 2N - rank([WJ, WG])
  std::vector<std::string> notes;

  // Worst verdict among the evaluated baseline checks that decide the
  // outcome: the mean-restriction check when run, else the generic rank of
  // [WJ, WG].
  Verdict overall() const;
};

IdentificationReport identify(const StackedDesign& design, const IdentifyOptions& opts = {});

}  // namespace peerpanel
