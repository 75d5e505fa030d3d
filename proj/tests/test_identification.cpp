#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "peerpanel/errors.hpp"
#include "peerpanel/identification.hpp"
#include "peerpanel/linalg.hpp"

using namespace peerpanel;

namespace {

MatrixXd dense(const SparseMatrix& S) { return MatrixXd(S); }

MatrixXd JGD(const StackedDesign& d) { return gen::hcat(gen::hcat(dense(d.J), dense(d.G)), dense(d.D)); }

MatrixXd WJWG(const StackedDesign& d)
{
  const MatrixXd W = gen::dense_annihilator(gen::hcat(dense(d.D), dense(d.fe_extra)));
  return W * gen::hcat(dense(d.J), dense(d.G));
}

// One mover plus a third individual who stays in group 2 in both periods.
PanelIndex example1_plus_stayer()
{
  return build_panel(gen::records({{1, 1, 1}, {2, 1, 2}, {3, 1, 2}, {1, 2, 1}, {2, 2, 1}, {3, 2, 2}}));
}

// Everyone fixed to one group in all periods.
PanelIndex static_panel(Index N, Index M, Index T)
{
  std::vector<Index> g(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) g[i] = i % M;
  return PanelIndex::from_assignment(std::vector<std::vector<Index>>(static_cast<std::size_t>(T), g), M);
}

}  // namespace

TEST_CASE("ranks of the two fixtures")
{
  const StackedDesign d1 = gen::lim_design(gen::example1());
  CHECK(rank_of(JGD(d1)).rank == 4);
  CHECK(rank_of(WJWG(d1)).rank == 3);
  const StackedDesign d2 = gen::lim_design(gen::example2());
  CHECK(rank_of(JGD(d2)).rank == 3);
  CHECK(rank_of(WJWG(d2)).rank == 2);
}

TEST_CASE("rank_of records the threshold and bracketing singular values")
{
  MatrixXd A = MatrixXd::Zero(3, 3);
  A(0, 0) = 2.0;
  A(1, 1) = 1.0;
  const RankInfo r = rank_of(A);
  CHECK(r.rank == 2);
  CHECK(r.sigma_above == doctest::Approx(1.0));
  CHECK(r.sigma_below == 0.0);
  CHECK(r.threshold == doctest::Approx(3 * 2.0 * std::numeric_limits<double>::epsilon() * 64));
  CHECK(rank_of(A, RankPolicy::absolute(1.5)).rank == 1);
  A(2, 2) = std::nan("");
  CHECK_THROWS_AS(rank_of(A), NonFinite);
}

TEST_CASE("rank verdicts are invariant to row permutation and positive rescaling")
{
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Index N = 4 + static_cast<Index>(rng.below(5));
    const PanelIndex p = gen::random_panel(rng, N, 3, 3, 0.6);
    const StackedDesign d = stack_design(p, liom(p));
    const MatrixXd A = WJWG(d);
    std::vector<Index> perm(static_cast<std::size_t>(A.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index k = A.rows() - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(static_cast<std::uint64_t>(k + 1))]);
    MatrixXd P(A.rows(), A.cols());
    for (Index k = 0; k < A.rows(); ++k) P.row(k) = A.row(perm[k]);
    const Index r = rank_of(A).rank;
    CHECK(rank_of(P).rank == r);
    CHECK(rank_of(37.5 * A).rank == r);
    CHECK(rank_of(1e-3 * P).rank == r);
    CHECK(check_cor3(d).rank.rank == r);
    CHECK(r == gen::dense_rank(A));
  }
}

TEST_CASE("check_cor2 verdicts")
{
  const StackedDesign d1 = gen::lim_design(gen::example1());
  CHECK(check_cor2(d1, VectorXd((VectorXd(2) << 1.0, 0.0).finished())).verdict == Verdict::identified);
  CHECK(check_cor2(d1, VectorXd((VectorXd(2) << 0.7, 0.7).finished())).verdict == Verdict::not_identified);
  CHECK(check_cor2(d1).verdict == Verdict::generically_identified);
  const Cor2Result c2 = check_cor2(gen::lim_design(gen::example2()));
  CHECK(c2.verdict == Verdict::not_identified);
  CHECK(c2.rank.rank == 3);
  CHECK(c2.expected_rank == 4);

  // Rows not summing to one: the check does not apply.
  const PanelIndex p = gen::example1();
  CHECK(check_cor2(stack_design(p, liom(p))).verdict == Verdict::inconclusive);
}

TEST_CASE("check_cor3 verdicts")
{
  const Cor3Result a = check_cor3(gen::lim_design(gen::example1()));
  CHECK(a.verdict == Verdict::generically_identified);
  CHECK(a.rank.rank == 3);
  CHECK(a.required == 3);
  const Cor3Result b = check_cor3(gen::lim_design(gen::example2()));
  CHECK(b.verdict == Verdict::not_identified);
  CHECK(b.rank.rank == 2);

  const PanelIndex s = static_panel(3, 2, 3);
  for (const Network& net : {lim(s), liom(s)}) {
    const Cor3Result c = check_cor3(stack_design(s, net));
    CHECK(c.verdict == Verdict::not_identified);
    CHECK(c.rank.rank <= 3);
  }
}

TEST_CASE("check_prop1 on the swap fixture returns a verified witness")
{
  const StackedDesign d = gen::lim_design(gen::example2());
  const MatrixXd X = gen::hcat(dense(d.D), dense(d.fe_extra));
  Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    const VectorXd mu = gen::normal_vector(rng, 2);
    Prop1Options opts;
    opts.rho = -1.0 + 2.0 * rng.uniform();
    const Prop1Result r = check_prop1(d, mu, opts);
    REQUIRE(r.verdict == Verdict::not_identified);
    REQUIRE(r.has_witness);
    // Null space is {(u, -u)}.
    CHECK(r.null_basis.cols() == 2);
    CHECK((r.null_basis.topRows(2) + r.null_basis.bottomRows(2)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(r.rho_bar - opts.rho) > 1e-6);
    const VectorXd lhs = (dense(d.J) + opts.rho * dense(d.G)) * mu;
    const VectorXd rhs = (dense(d.J) + r.rho_bar * dense(d.G)) * r.mu_bar + X * r.gamma_shift;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("check_prop1 on the one-mover fixture")
{
  const StackedDesign d = gen::lim_design(gen::example1());
  const Prop1Result r = check_prop1(d, (VectorXd(2) << 1.0, 0.0).finished());
  CHECK(r.verdict == Verdict::identified);
  // Null-space vectors have v1 = c iota, v2 = -c iota.
  REQUIRE(r.null_basis.cols() == 1);
  const VectorXd v = r.null_basis.col(0);
  CHECK(std::abs(v[0] - v[1]) <= 1e-12);
  CHECK(std::abs(v[2] - v[3]) <= 1e-12);
  CHECK(std::abs(v[0] + v[2]) <= 1e-12);

  CHECK(check_prop1(d, (VectorXd(2) << 2.0, 2.0).finished()).verdict == Verdict::not_identified);
  const Prop1Result z = check_prop1(d, VectorXd::Zero(2));
  CHECK(z.verdict == Verdict::not_identified);
  CHECK(z.has_witness);
}

TEST_CASE("mu_alpha = 0 is never identified")
{
  Rng rng(42);
  for (int rep = 0; rep < 5; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 6, 2, 3, 0.5);
    CHECK(check_prop1(gen::lim_design(p), VectorXd::Zero(6)).verdict == Verdict::not_identified);
  }
}

TEST_CASE("generic rank condition makes failures of the exact condition rare")
{
  Rng rng(43);
  // Find an identifying random design.
  StackedDesign d;
  for (;;) {
    const PanelIndex p = gen::random_panel(rng, 6, 3, 3, 0.5);
    d = stack_design(p, liom(p));
    if (check_cor3(d).verdict == Verdict::generically_identified) break;
  }
  Prop1Options opts;
  opts.grid_half = 400;
  for (int rep = 0; rep < 200; ++rep) {
    const VectorXd mu = gen::normal_vector(rng, 6);
    CHECK(check_prop1(d, mu, opts).verdict == Verdict::identified);
  }
}

TEST_CASE("check_prop1 witness is valid on random non-identified designs")
{
  Rng rng(44);
  int checked = 0;
  for (int rep = 0; rep < 40 && checked < 10; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 5, 2, 2, 0.8);
    const StackedDesign d = gen::lim_design(p);
    const VectorXd mu = gen::normal_vector(rng, 5);
    const Prop1Result r = check_prop1(d, mu);
    if (r.verdict != Verdict::not_identified || !r.has_witness) continue;
    ++checked;
    const MatrixXd X = gen::hcat(dense(d.D), dense(d.fe_extra));
    const VectorXd lhs = dense(d.J) * mu;
    const VectorXd rhs = (dense(d.J) + r.rho_bar * dense(d.G)) * r.mu_bar + X * r.gamma_shift;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(checked > 0);
}

TEST_CASE("maximal linear independence basics")
{
  Rng rng(45);
  const MatrixXd A = gen::normal_matrix(rng, 3, 3);
  auto both = maximal_linear_independence({A, A}, {0, 1});
  CHECK_FALSE(both.independent[0]);
  CHECK_FALSE(both.independent[1]);

  MatrixXd B = gen::normal_matrix(rng, 3, 3);
  const Eigen::Map<const VectorXd> a(A.data(), 9);
  Eigen::Map<VectorXd> b(B.data(), 9);
  b -= a * (a.dot(b) / a.squaredNorm());
  auto orth = maximal_linear_independence({A, B}, {0, 1});
  CHECK(orth.independent[0]);
  CHECK(orth.independent[1]);

  // A3 = A1 + A2 leaves A4 maximally independent only.
  const MatrixXd C = gen::normal_matrix(rng, 3, 3), E = gen::normal_matrix(rng, 3, 3);
  auto mix = maximal_linear_independence({A, C, A + C, E}, {0, 1, 2, 3});
  CHECK(mix.independent == std::vector<bool>{false, false, false, true});
  CHECK(maximal_linear_independence({MatrixXd::Zero(2, 2), A.topLeftCorner(2, 2)}, {0}).independent[0] == false);
  CHECK_THROWS_AS(maximal_linear_independence({A, MatrixXd::Zero(2, 2)}, {0}), ShapeMismatch);
}

TEST_CASE("maximal linear independence agrees with a dense null-space oracle")
{
  Rng rng(46);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<MatrixXd> mats;
    for (int k = 0; k < 5; ++k) mats.push_back(gen::normal_matrix(rng, 4, 4));
    // Plant a dependency among a random subset.
    const Index a = static_cast<Index>(rng.below(5)), b = (a + 1 + static_cast<Index>(rng.below(4))) % 5;
    if (rep % 2 == 0) mats[b] = 2.0 * mats[a];
    MatrixXd V(16, 5);
    for (int k = 0; k < 5; ++k) V.col(k) = Eigen::Map<const VectorXd>(mats[k].data(), 16);
    Eigen::FullPivLU<MatrixXd> lu(V);
    const MatrixXd K = lu.kernel();
    const bool has_kernel = lu.rank() < 5;
    const auto res = maximal_linear_independence(mats, {0, 1, 2, 3, 4});
    for (int k = 0; k < 5; ++k) {
      const bool oracle = !has_kernel || K.row(k).cwiseAbs().maxCoeff() <= 1e-10;
      CHECK(res.independent[k] == oracle);
    }
  }
}

TEST_CASE("probing every index is plain linear independence")
{
  Rng rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<MatrixXd> mats;
    for (int k = 0; k < 4; ++k) mats.push_back(gen::normal_matrix(rng, 3, 2));
    if (rep % 3 == 0) mats[3] = mats[0] - mats[1];
    MatrixXd V(6, 4);
    for (int k = 0; k < 4; ++k) V.col(k) = Eigen::Map<const VectorXd>(mats[k].data(), 6);
    const bool independent = gen::dense_rank(V) == 4;
    const auto res = maximal_linear_independence(mats, {0, 1, 2, 3});
    const bool all = std::all_of(res.independent.begin(), res.independent.end(), [](bool x) { return x; });
    CHECK(all == independent);
  }
}

TEST_CASE("Gram route agrees with the dense route")
{
  Rng rng(48);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<MatrixXd> mats;
    for (int k = 0; k < 5; ++k) mats.push_back(gen::normal_matrix(rng, 4, 3));
    if (rep % 2 == 0) mats[4] = mats[1] + 3.0 * mats[2];
    MatrixXd gram(5, 5);
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) gram(a, b) = (mats[a].array() * mats[b].array()).sum();
    const auto dense_res = maximal_linear_independence(mats, {0, 1, 2, 3, 4});
    const auto gram_res = maximal_linear_independence_gram(gram, {0, 1, 2, 3, 4});
    CHECK(dense_res.independent == gram_res.independent);
  }
}

TEST_CASE("linear-in-means variance check: fails on the one-mover fixture, restored by a stayer")
{
  const Prop2Result a = check_prop2y_lim(gen::lim_design(gen::example1()));
  CHECK(a.verdict == Verdict::not_identified);
  const Prop2Result b = check_prop2y_lim(gen::lim_design(example1_plus_stayer()));
  CHECK(b.verdict == Verdict::identified);

  const PanelIndex p = gen::example1();
  CHECK_THROWS_AS(check_prop2y_lim(stack_design(p, liom(p))), WrongNetworkKind);
}

TEST_CASE("linear-in-means variance check fails for a single period and both routes agree")
{
  Rng rng(49);
  for (int rep = 0; rep < 5; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 9, 3, 1);
    CHECK(check_prop2y_lim(gen::lim_design(p)).verdict == Verdict::not_identified);
  }
  for (int rep = 0; rep < 5; ++rep) {
    const PanelIndex p = gen::random_panel(rng, 8, 3, 3, 0.5);
    const StackedDesign d = gen::lim_design(p);
    const Annihilator W = make_annihilator(d);
    CHECK(check_prop2y_lim(d, W, 1000).route == "dense");
    CHECK(check_prop2y_lim(d, W, 1).route == "gram");
    CHECK(check_prop2y_lim(d, W, 1000).verdict == check_prop2y_lim(d, W, 1).verdict);
  }
}

TEST_CASE("variance-check matrices match dense construction")
{
  const StackedDesign d = gen::lim_design(example1_plus_stayer());
  const MatrixXd W = gen::dense_annihilator(dense(d.D));
  const MatrixXd J = dense(d.J), G = dense(d.G), F = dense(d.F);
  const std::vector<MatrixXd> mats = prop2y_matrices(d, make_annihilator(d));
  REQUIRE(mats.size() == 5);
  const std::vector<MatrixXd> oracle = {W, W * J * J.transpose() * W, W * (J * G.transpose() + G * J.transpose()) * W,
                                        W * G * G.transpose() * W, W * F * W};
  for (int k = 0; k < 5; ++k) CHECK((mats[k] - oracle[k]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("endogenous generic rank check")
{
  const PanelIndex p1 = gen::example1();
  const EndoResult a = check_endo_generic(gen::lim_design(p1));
  CHECK(a.h_equals_g);
  CHECK(a.verdict == Verdict::not_identified);

  // Rank of [WJ, WG, WH] against a direct SVD on the 4 x 6 matrix.
  const StackedDesign d = stack_design(p1, liom(p1));
  const EndoResult b = check_endo_generic(d);
  const MatrixXd W = gen::dense_annihilator(dense(d.D));
  const MatrixXd A = W * gen::hcat(gen::hcat(dense(d.J), dense(d.G)), dense(d.H));
  CHECK(b.rank.rank == gen::dense_rank(A));
  CHECK(b.required == 5);
  CHECK(b.verdict == Verdict::not_identified);

  Rng rng(50);
  const PanelIndex single = gen::random_panel(rng, 10, 3, 1);
  CHECK(check_endo_generic(gen::lim_design(single)).verdict == Verdict::not_identified);

  // Rows that do not sum to one violate the maintained assumptions.
  const PanelIndex lonely = build_panel(gen::records({{1, 1, 1}, {2, 1, 1}, {3, 1, 2}, {1, 2, 2}, {2, 2, 1}, {3, 2, 1}}));
  Network net = liom(lonely);
  net.per_period[0].coeffRef(0, 1) = 0.5;
  CHECK_THROWS_AS(check_endo_generic(stack_design(lonely, net)), AssumptionViolation);
}

TEST_CASE("between-group blocks vanish for a group that never exchanges members")
{
  // Group 3 keeps the same two members throughout; groups 1 and 2 swap members.
  const PanelIndex p = build_panel(gen::records({{1, 1, 1}, {2, 1, 1}, {3, 1, 2}, {4, 1, 2}, {5, 1, 3}, {6, 1, 3},
                                                 {1, 2, 2}, {2, 2, 1}, {3, 2, 1}, {4, 2, 2}, {5, 2, 3}, {6, 2, 3}}));
  const StackedDesign d = stack_design(p, liom(p));
  const Annihilator W = make_annihilator(d);
  const Index sealed = p.group_id("3");
  for (const MatrixXd& B : prop3y_blocks(d, W, sealed)) CHECK((B.size() == 0 || B.cwiseAbs().maxCoeff() <= 1e-12));
  const Prop3Result r = check_prop3y(d, W, {sealed});
  REQUIRE(r.groups.size() == 1);
  CHECK_FALSE(r.groups[0].passes);
  CHECK(r.groups[0].zero_blocks);
}

TEST_CASE("per-group blocks match a dense construction")
{
  const PanelIndex p = example1_plus_stayer();
  const StackedDesign d = stack_design(p, liom(p));
  const MatrixXd W = gen::dense_annihilator(dense(d.D));
  const MatrixXd J = dense(d.J), G = dense(d.G), H = dense(d.H);
  const std::vector<MatrixXd> full = {J * J.transpose(), J * G.transpose() + G * J.transpose(),
                                      J * H.transpose() + H * J.transpose(), G * H.transpose() + H * G.transpose(),
                                      G * G.transpose(), H * H.transpose()};
  for (Index m = 0; m < d.num_groups; ++m) {
    std::vector<Index> in, out;
    for (Index r = 0; r < d.num_rows; ++r) (d.row_map[r].group == m ? in : out).push_back(r);
    const auto blocks = prop3y_blocks(d, make_annihilator(d), m);
    REQUIRE(blocks.size() == 6);
    for (int k = 0; k < 6; ++k) {
      const MatrixXd P = W * full[k] * W;
      MatrixXd oracle(in.size(), out.size());
      for (std::size_t a = 0; a < in.size(); ++a)
        for (std::size_t b = 0; b < out.size(); ++b) oracle(a, b) = P(in[a], out[b]);
      CHECK(blocks[k].rows() == oracle.rows());
      CHECK(blocks[k].cols() == oracle.cols());
      CHECK((blocks[k] - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  // Verdict against the dense blocks.
  const Prop3Result r = check_prop3y(d);
  bool any = false;
  for (Index m = 0; m < d.num_groups; ++m) {
    const auto blocks = prop3y_blocks(d, make_annihilator(d), m);
    const auto mli = maximal_linear_independence(blocks, {0, 1, 2});
    any = any || (mli.independent[0] && mli.independent[1] && mli.independent[2]);
  }
  CHECK((r.verdict == Verdict::identified) == any);
}

TEST_CASE("psi + rho = 0 is not identified")
{
  const PanelIndex p = example1_plus_stayer();
  const StackedDesign d = stack_design(p, liom(p));
  const Prop3Result r = check_prop3y(d, make_annihilator(d), {}, 0.0);
  CHECK(r.verdict == Verdict::not_identified);
  REQUIRE(r.psi_plus_rho.has_value());
}

TEST_CASE("identify assembles a consistent report")
{
  IdentifyOptions o;
  o.mu_alpha = (VectorXd(2) << 1.0, 0.0).finished();
  o.endogenous = true;
  const IdentificationReport a = identify(gen::lim_design(gen::example1()), o);
  CHECK(a.cor3.verdict == Verdict::generically_identified);
  CHECK(a.nullspace_dim == 1);
  REQUIRE(a.prop1.has_value());
  CHECK(a.overall() == Verdict::identified);
  CHECK(a.prop2y.has_value());
  CHECK(a.endo.has_value());

  const IdentificationReport b = identify(gen::lim_design(gen::example2()), o);
  CHECK(b.overall() == Verdict::not_identified);
  CHECK(b.nullspace_dim == 2);

  const IdentificationReport c = identify(gen::lim_design(gen::example1()));
  CHECK_FALSE(c.prop1.has_value());
  CHECK(c.overall() == Verdict::generically_identified);
}
