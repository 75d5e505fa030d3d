#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peerpanel/annihilator.hpp"
#include "peerpanel/design.hpp"

namespace peerpanel {

enum class BootstrapCluster { observation, individual };

struct FitOptions {
  double rho_lo = -2.0;
  double rho_hi = 2.0;
  Index grid_points = 201;
  double refine_tol = 1e-9;
  bool include_group_fe = true;   // D (group or group-period columns)
  bool include_period_fe = true;  // design.fe_extra, when the design has it
  MatrixXd X;                     // own covariates, R x K (may be empty)
  bool peer_covariates = false;   // add F X
  Index bootstrap_reps = 200;
  BootstrapCluster bootstrap_cluster = BootstrapCluster::observation;
  std::uint64_t seed = 0;
  bool force = false;  // fit even when the generic rank condition fails

  // Throws ConfigViolation.
  void validate() const;
};

struct EstimationResult {
  double rho_hat = 0.0;
  VectorXd alpha_hat;
  VectorXd gamma_hat;      // coefficients on D
  VectorXd period_fe_hat;  // coefficients on fe_extra
  VectorXd beta_hat;       // own covariates
  VectorXd rho1_hat;       // peer covariates
  double se_rho = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> bootstrap_draws;
  Index bootstrap_failures = 0;
  double sigma_alpha_hat = std::numeric_limits<double>::quiet_NaN();
  double mean_row_norm = 0.0;
  double avg_row_norm_effect = 0.0;
  double pp_effect = 0.0;
  double ssr = 0.0;
  std::vector<std::pair<double, double>> profile;  // grid (rho, SSR)
  std::vector<std::string> flags;
  Index deficiency_dim = 0;  // alpha directions fixed by the min-norm rule
  Index cor3_rank = -1;      // rank([WJ, WG]) under the estimator's fixed columns
  Index evaluations = 0;
  VectorXd fitted;
  VectorXd residuals;

  bool has_flag(const std::string& prefix) const;
};

// Fixed columns of the estimator: [D?, fe_extra?, X, F X?], dense.
MatrixXd estimator_fixed_columns(const StackedDesign& design, const FitOptions& opts);
Annihilator estimator_annihilator(const StackedDesign& design, const FitOptions& opts);

struct ProfilePoint {
  double ssr = 0.0;
  VectorXd coef;  // [alpha; fixed-column coefficients]
  Index deficiency = 0;
};

// Direct evaluation: min-norm least squares of y on Z(rho) = [J + rho G,
// fixed columns] by a complete orthogonal decomposition. Dense; meant for
// small problems and as a cross-check of ProfileObjective.
ProfilePoint profile_ssr(double rho, const VectorXd& y, const StackedDesign& design,
                         const FitOptions& opts);

// Concentrated objective SSR(rho) = min_alpha |W y - W (J + rho G) alpha|^2,
// W the annihilator of the fixed columns.
//
// The N x N Gram blocks of A = WJ and B = WG are formed once, from sparse
// products minus a low-rank correction, and then reused for every rho and
// every outcome vector (the bootstrap only swaps y). Directions of alpha
// that neither A nor B can see are removed up front; the remaining system
// is solved by Cholesky with an eigen pseudo-inverse fallback. SSR is taken
// from the explicit residual.
class ProfileObjective {
 public:
  // Keeps references to both arguments; they must outlive the objective.
  ProfileObjective(const StackedDesign& design, const Annihilator& W);

  void set_outcome(const VectorXd& y);

  struct Eval {
    double ssr = 0.0;
    double deriv = 0.0;  // dSSR/drho
    VectorXd alpha;
    bool deficient = false;
  };
  Eval evaluate(double rho) const;

  Index common_null_dim() const { return n_ - basis_.cols(); }
  // |W y|^2, the SSR of the empty model.
  double outcome_ssr() const { return w_.squaredNorm(); }
  const Annihilator& annihilator() const { return W_; }

 private:
  const StackedDesign& design_;
  const Annihilator& W_;
  Index n_ = 0;
  MatrixXd basis_;  // N x n, orthonormal, spans the visible alpha directions
  MatrixXd AA_, AB_, BB_;  // projected onto basis_
  VectorXd w_, Aw_, Bw_;
};

struct SearchResult {
  double rho = 0.0;
  ProfileObjective::Eval at;
  std::vector<std::pair<double, double>> grid;
  Index evaluations = 0;
  bool flat = false;  // most of the grid within 1e-10 |W y|^2 of the minimum
  bool boundary = false;
};

// Grid over [rho_lo, rho_hi], golden-section refinement of the best bracket
// to refine_tol, then secant steps on dSSR/drho inside the bracket. Returns
// the best point evaluated anywhere.
SearchResult minimize_profile(const ProfileObjective& obj, const FitOptions& opts);

// Throws NotIdentifiedRefusal when rank([WJ, WG]) < N + 1 under the
// estimator's fixed columns and opts.force is false; NonFinite on NaN in y.
EstimationResult fit_nls(const VectorXd& y, const StackedDesign& design, const FitOptions& opts = {});

struct BootstrapResult {
  double se = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> draws;
  Index failures = 0;
};

// Rademacher weights of replicate b: one per row, or one per individual
// shared across that individual's rows. Stream (seed, bootstrap, b).
VectorXd bootstrap_weights(const StackedDesign& design, BootstrapCluster cluster, std::uint64_t seed,
                           Index b);

// y*_b = fitted + w_b .* residuals, refit, se = sample sd of rho*_b over
// successful replicates.
BootstrapResult wild_bootstrap(const EstimationResult& fit, const StackedDesign& design,
                               const FitOptions& opts);

// Sample sd (denominator N - 1). Throws DegenerateN for N < 2.
double sigma_alpha(const VectorXd& alpha_hat);

struct EffectSizes {
  double mean_row_norm = 0.0;        // mean over rows of (sum_j G_ij^2)^(1/2)
  double avg_row_norm_effect = 0.0;  // rho * mean_row_norm
  double pp_effect = 0.0;            // rho * sigma_alpha * mean_row_norm
};

// Means over the observation rows of the stacked G.
EffectSizes effect_sizes(double rho_hat, double sigma_alpha_hat, const SparseMatrix& G_stacked);
// Means over observed (i, t) rows of the per-period networks.
EffectSizes effect_sizes(double rho_hat, double sigma_alpha_hat, const Network& net,
                         const PanelIndex& panel);

// Benchmark with alpha observed: least squares of y - J alpha on
// [G alpha, fixed columns], plus an intercept whenever group or period
// columns are present; the coefficient on G alpha is rho_hat. Throws
// SingularDesign when G alpha is spanned by the fixed columns.
EstimationResult fit_observed_alpha(const VectorXd& y, const StackedDesign& design,
                                    const VectorXd& alpha_true, const FitOptions& opts = {});

}  // namespace peerpanel
