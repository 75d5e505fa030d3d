#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "peerpanel/annihilator.hpp"
#include "peerpanel/design.hpp"
#include "peerpanel/errors.hpp"
#include "peerpanel/panel.hpp"

using namespace peerpanel;

namespace {

MatrixXd dense(const SparseMatrix& S) { return MatrixXd(S); }

double max_abs(const MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("build_panel densifies the one-mover fixture")
{
  const PanelIndex p = gen::example1();
  CHECK(p.num_individuals() == 2);
  CHECK(p.num_groups() == 2);
  CHECK(p.num_periods() == 2);
  CHECK(p.num_rows() == 4);
  CHECK(p.balanced());
  CHECK(p.group_size(0, 1) == 2);
  CHECK(p.group_size(1, 1) == 0);
  CHECK(p.group_of(1, 0) == 1);
  CHECK(p.individual_id("2") == 1);
}

TEST_CASE("build_panel on a single record")
{
  const PanelIndex p = build_panel(gen::records({{1, 1, 1}}));
  CHECK(p.num_individuals() == 1);
  CHECK(p.num_groups() == 1);
  CHECK(p.num_periods() == 1);
  CHECK(p.group_size(0, 0) == 1);
}

TEST_CASE("build_panel accepts unbalanced panels and counts rows from the records")
{
  const auto recs = gen::records({{1, 1, 1}, {2, 1, 1}, {1, 2, 2}, {2, 2, 1}, {7, 2, 2}});
  const PanelIndex p = build_panel(recs);
  CHECK(p.num_rows() == static_cast<Index>(recs.size()));
  CHECK_FALSE(p.balanced());
  CHECK(p.group_of(p.individual_id("7"), 0) == -1);
  CHECK(p.row_of(p.individual_id("7"), 0) == -1);
}

TEST_CASE("build_panel orders numeric labels numerically and rejects bad input")
{
  const PanelIndex p = build_panel(gen::records({{10, 1, 1}, {9, 1, 1}, {100, 1, 2}}));
  CHECK(p.individual_labels() == std::vector<std::string>{"9", "10", "100"});
  CHECK_THROWS_AS(build_panel({}), EmptyInput);
  CHECK_THROWS_AS(build_panel(gen::records({{1, 1, 1}, {1, 1, 2}})), DuplicateObservation);
}

TEST_CASE("build_panel dictionary is stable under record reordering")
{
  auto recs = gen::records({{3, 2, 5}, {1, 1, 4}, {2, 1, 5}, {1, 2, 4}, {3, 1, 4}});
  const PanelIndex a = build_panel(recs);
  std::reverse(recs.begin(), recs.end());
  const PanelIndex b = build_panel(recs);
  CHECK(a.individual_labels() == b.individual_labels());
  CHECK(a.group_labels() == b.group_labels());
  for (Index r = 0; r < a.num_rows(); ++r) {
    CHECK(a.row(r).individual == b.row(r).individual);
    CHECK(a.row(r).group == b.row(r).group);
  }
}

TEST_CASE("stack_design reproduces the one-mover matrices")
{
  const StackedDesign d = gen::lim_design(gen::example1());
  MatrixXd JGD(4, 5);
  JGD << 1, 0, 1, 0, 1,
         0, 1, 0, 1, 0,
         1, 0, 0.5, 0.5, 1,
         0, 1, 0.5, 0.5, 1;
  MatrixXd got(4, 5);
  got << dense(d.J), dense(d.G), dense(d.D);
  CHECK(max_abs(got - JGD) == 0.0);
  CHECK(d.C.cols() == 2);
  CHECK(d.fe_extra.cols() == 0);
  CHECK(d.row_map[2].individual == 0);
  CHECK(d.row_map[2].period == 1);
}

TEST_CASE("annihilator reproduces the one-mover [WJ, WG]")
{
  const StackedDesign d = gen::lim_design(gen::example1());
  const Annihilator W = make_annihilator(d);
  MatrixXd expected(4, 4);
  expected << 1.0 / 3, -1.0 / 3, 1.0 / 3, -1.0 / 3,
              0, 1, 0, 1,
              1.0 / 3, -1.0 / 3, -1.0 / 6, 1.0 / 6,
              -2.0 / 3, 2.0 / 3, -1.0 / 6, 1.0 / 6;
  MatrixXd got(4, 4);
  got << W.apply(d.J), W.apply(d.G);
  CHECK(max_abs(got - expected) <= 1e-12);
}

TEST_CASE("swap fixture under linear-in-means has G = J")
{
  const StackedDesign d = gen::lim_design(gen::example2());
  CHECK(max_abs(dense(d.G) - dense(d.J)) == 0.0);
}

TEST_CASE("single-period stacking: J is the identity and F equals G")
{
  Rng rng(11);
  const PanelIndex p = gen::random_panel(rng, 7, 3, 1);
  const StackedDesign d = gen::lim_design(p);
  CHECK(max_abs(dense(d.J) - MatrixXd::Identity(7, 7)) == 0.0);
  CHECK(max_abs(dense(d.F) - dense(d.G)) == 0.0);
}

TEST_CASE("annihilator matches the dense pseudo-inverse projector")
{
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 3 + static_cast<Index>(rng.below(4)), 2 + static_cast<Index>(rng.below(2)),
                                           2 + static_cast<Index>(rng.below(2)), 0.4, 0.2);
    const bool dummies = rep % 2 == 1;
    const StackedDesign d = stack_design(p, liom(p), FixedEffects::group, dummies);
    const Annihilator W = make_annihilator(d);
    const MatrixXd oracle = gen::dense_annihilator(gen::hcat(dense(d.D), dense(d.fe_extra)));
    const MatrixXd A = gen::normal_matrix(rng, d.num_rows, 3);
    CHECK(max_abs(W.apply(A) - oracle * A) <= 1e-10);
    CHECK(max_abs(W.apply(d.D)) <= 1e-10);
    if (d.has_fe_extra()) CHECK(max_abs(W.apply(d.fe_extra)) <= 1e-10);
  }
}

TEST_CASE("annihilator is idempotent and symmetric")
{
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 12, 4, 3, 0.6, 0.1);
    const StackedDesign d = stack_design(p, lim(p), rep % 3 == 0 ? FixedEffects::group_period : FixedEffects::group,
                                         rep % 2 == 0);
    const Annihilator W = make_annihilator(d);
    const VectorXd x = gen::normal_vector(rng, d.num_rows);
    const VectorXd y = gen::normal_vector(rng, d.num_rows);
    const VectorXd Wx = W.apply(x);
    CHECK((W.apply(Wx) - Wx).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs(x.dot(W.apply(y)) - Wx.dot(y)) <= 1e-10);
  }
}

TEST_CASE("annihilator absorbs duplicated and dependent columns")
{
  Rng rng(9);
  MatrixXd A = gen::normal_matrix(rng, 10, 2);
  MatrixXd extra(10, 3);
  extra << A, A.col(0) + 2.0 * A.col(1);
  const Annihilator W(SparseMatrix(10, 0), extra);
  CHECK(W.rank() == 2);
  CHECK(max_abs(W.apply(extra)) <= 1e-10);
}

TEST_CASE("row-stochastic networks stack to G iota = iota")
{
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 15, 4, 4, 0.5, 0.15);
    for (const Network& net : {lim(p), pliom(p)}) {
      const StackedDesign d = stack_design(p, net);
      const VectorXd s = d.G * VectorXd::Ones(d.num_individuals);
      for (Index r = 0; r < d.num_rows; ++r) {
        // PLIOM rows stay empty while an individual has never had a group mate.
        if (net.kind == NetworkKind::pliom && s[r] == 0.0) continue;
        CHECK(std::abs(s[r] - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("linear-in-means has H = G")
{
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 14, 4, 3, 0.5, 0.1);
    const StackedDesign d = gen::lim_design(p);
    CHECK(max_abs(dense(d.H) - dense(d.G)) <= 1e-12);
  }
}

TEST_CASE("single-period linear-in-means degeneracy identity")
{
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 9, 3, 1);
    const StackedDesign d = gen::lim_design(p);
    const MatrixXd W = gen::dense_annihilator(dense(d.D));
    const MatrixXd J = dense(d.J), G = dense(d.G), F = dense(d.F);
    const MatrixXd a = W * (J * G.transpose() + G * J.transpose()) * W;
    const MatrixXd b = 2.0 * W * G * G.transpose() * W;
    const MatrixXd c = 2.0 * W * F * W;
    CHECK(max_abs(a - b) <= 1e-10);
    CHECK(max_abs(b - c) <= 1e-10);
  }
}

TEST_CASE("without mobility rank([J, G, D]) is at most N")
{
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 8, 3, 4, 1.0);
    for (const Network& net : {lim(p), liom(p), pliom(p), social(p, 7)}) {
      const StackedDesign d = stack_design(p, net);
      CHECK(gen::dense_rank(gen::hcat(gen::hcat(dense(d.J), dense(d.G)), dense(d.D))) <= 8);
    }
  }
}

TEST_CASE("apply_params matches the one-mover outcome equations")
{
  const StackedDesign d = gen::lim_design(gen::example1());
  for (double rho : {-0.7, 0.0, 0.5, 1.3}) {
    const double g1 = 0.3;
    ModelParams params;
    params.rho = rho;
    params.alpha = (VectorXd(2) << 1.0, 0.0).finished();
    params.gamma = (VectorXd(1) << g1).finished();
    const VectorXd y = apply_params(d, params, VectorXd::Zero(4));
    // Rows are (1,1), (2,1), (1,2), (2,2).
    CHECK(y[0] == doctest::Approx(1 + rho + g1).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(0.0));
    CHECK(y[2] == doctest::Approx(1 + rho / 2 + g1).epsilon(1e-14));
    CHECK(y[3] == doctest::Approx(rho / 2 + g1).epsilon(1e-14));
  }
}

TEST_CASE("apply_params without peer or group effects returns J alpha plus eps")
{
  Rng rng(12);
  const PanelIndex p = gen::random_panel(rng, 10, 3, 3, 0.5, 0.2);
  const StackedDesign d = gen::lim_design(p);
  ModelParams params;
  params.alpha = gen::normal_vector(rng, 10);
  params.gamma = VectorXd::Zero(d.D.cols());
  const VectorXd eps = gen::normal_vector(rng, d.num_rows);
  const VectorXd y = apply_params(d, params, eps);
  CHECK((y - d.J * params.alpha - eps).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("endogenous reduced form matches a truncated Neumann series")
{
  Rng rng(13);
  const PanelIndex p = gen::random_panel(rng, 12, 3, 3, 0.5);
  const StackedDesign d = gen::lim_design(p);
  ModelParams params;
  params.rho = 0.5;
  params.psi = 0.4;
  params.alpha = gen::normal_vector(rng, 12);
  params.gamma = gen::normal_vector(rng, d.D.cols());
  const VectorXd eps = gen::normal_vector(rng, d.num_rows);
  const VectorXd y = apply_params(d, params, eps);

  const VectorXd v = (dense(d.J) + params.rho * dense(d.G)) * params.alpha + dense(d.D) * params.gamma + eps;
  const MatrixXd F = dense(d.F);
  VectorXd term = v, series = v;
  for (int k = 1; k <= 60; ++k) {
    term = params.psi * (F * term);
    series += term;
  }
  CHECK((y - series).cwiseAbs().maxCoeff() <= 1e-10);

  params.psi = 1.0;
  CHECK_THROWS_AS(apply_params(d, params, eps), SpectralRadiusViolation);
}

TEST_CASE("apply_params covariate terms")
{
  Rng rng(14);
  const PanelIndex p = gen::random_panel(rng, 10, 3, 3, 0.5);
  const StackedDesign d = stack_design(p, liom(p));
  const MatrixXd X = gen::normal_matrix(rng, d.num_rows, 2);
  ModelParams params;
  params.rho = 0.2;
  params.alpha = gen::normal_vector(rng, 10);
  params.gamma = gen::normal_vector(rng, d.D.cols());
  params.beta = gen::normal_vector(rng, 2);
  params.rho1 = gen::normal_vector(rng, 2);
  const VectorXd eps = VectorXd::Zero(d.num_rows);
  const VectorXd y = apply_params(d, params, eps, X);
  const VectorXd oracle = (dense(d.J) + 0.2 * dense(d.G)) * params.alpha + dense(d.D) * params.gamma + X * params.beta +
                          dense(d.F) * X * params.rho1;
  CHECK((y - oracle).cwiseAbs().maxCoeff() <= 1e-12);
  params.alpha.resize(3);
  CHECK_THROWS_AS(apply_params(d, params, eps, X), DimensionMismatch);
}

TEST_CASE("group-period mode drops the last cell and warns")
{
  Rng rng(15);
  const PanelIndex p = gen::random_panel(rng, 10, 3, 3, 0.5);
  const StackedDesign d = stack_design(p, lim(p), FixedEffects::group_period);
  Index cells = 0;
  for (Index t = 0; t < 3; ++t)
    for (Index m = 0; m < 3; ++m) cells += p.group_size(m, t) > 0;
  CHECK(d.C.cols() == cells);
  CHECK(d.D.cols() == cells - 1);
  CHECK_FALSE(d.warnings.empty());
  // Every row of C has exactly one 1.
  const VectorXd rs = d.C * VectorXd::Ones(d.C.cols());
  CHECK((rs.array() == 1.0).all());
}

TEST_CASE("period dummies drop the first period")
{
  Rng rng(16);
  const PanelIndex p = gen::random_panel(rng, 8, 2, 4, 0.5, 0.2);
  const StackedDesign d = stack_design(p, lim(p), FixedEffects::group, true);
  CHECK(d.fe_extra.cols() == 3);
  for (Index r = 0; r < d.num_rows; ++r) {
    const Index t = d.row_map[r].period;
    for (Index k = 0; k < 3; ++k) CHECK(d.fe_extra.coeff(r, k) == (t == k + 1 ? 1.0 : 0.0));
  }
}

TEST_CASE("stack_design rejects a network of the wrong size")
{
  const PanelIndex a = gen::example1();
  Rng rng(1);
  const PanelIndex b = gen::random_panel(rng, 5, 2, 2);
  CHECK_THROWS_AS(stack_design(a, lim(b)), DimensionMismatch);
}
