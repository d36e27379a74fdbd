#include <gtest/gtest.h>

#include "mfdyn/counting.hpp"
#include "oracles.hpp"

using namespace mfdyn;

namespace {

struct Fixture {
  BasisPtr basis;
  CMat u;
  Projections P;
  Fixture(int L, int N, std::uint64_t seed)
      : basis(make_basis(L, N)), u(make_u(L, N, seed)), P(u, basis) {}
  static CMat make_u(int L, int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return oracle::random_isometry(rng, L, N);
  }
};

ManyBodyState random_state(const BasisPtr& b, std::mt19937_64& rng) {
  ManyBodyState s;
  s.basis = b;
  s.amp = oracle::random_unit(rng, b->size());
  return s;
}

ManyBodyState slater_of(const CMat& u, const BasisPtr& b) {
  OrbitalSet orb;
  orb.grid = make_grid(1, b->sites(), 1.0, DerivativeMode::lattice);
  orb.phi = u / std::sqrt(orb.grid->cell_volume());
  orb.scaling = make_scaling(static_cast<int>(u.cols()), 1.0);
  return slater_state(orb, b);
}

}  // namespace

TEST(Weights, Tables) {
  const int N = 8;
  EXPECT_EQ(weight_n(N).table, weight_m(N, 1.0).table);
  const auto m = weight_m(N, 0.5), w = weight_w(N, 0.5);
  EXPECT_NEAR(m(2), 2.0 / std::sqrt(8.0), 1e-15);
  EXPECT_EQ(m(3), 1.0);
  EXPECT_NEAR(w(2) + m(2), 1.0, 1e-15);
  EXPECT_NEAR(weight_ell(N)(2), 0.5, 1e-15);
  const RVec s = weight_n(N).shifted(-2);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_NEAR(s[5], 3.0 / 8.0, 1e-15);
  EXPECT_EQ(weight_n(N).shifted(3)[6], 0.0);
  EXPECT_THROW(weight_custom(RVec::Constant(3, 1.5)), ContractViolation);
  EXPECT_THROW(weight_m(N, 0.0), ContractViolation);
  EXPECT_THROW(weight_n(N).shifted(9), ContractViolation);
}

TEST(Projections, UnitaryCompletionAndRotation) {
  Fixture fx(8, 3, 1);
  const CMat& U = fx.P.U();
  EXPECT_LT(oracle::max_abs(U.adjoint() * U - CMat::Identity(8, 8)), 1e-13);
  EXPECT_LT(oracle::max_abs(fx.P.p() * U.rightCols(5)), 1e-13);
  const CMat& S = fx.P.S();
  EXPECT_LT(oracle::max_abs(S.adjoint() * S - CMat::Identity(56, 56)), 1e-12);
  EXPECT_LT(oracle::max_abs(fx.P.p() * fx.P.p() - fx.P.p()), 1e-14);
  EXPECT_LT(oracle::max_abs(fx.P.p() * fx.P.q()), 1e-14);
  EXPECT_NEAR(std::real(fx.P.p().trace()), 3.0, 1e-13);
}

TEST(Projections, RejectsNonOrthonormal) {
  CMat u = CMat::Zero(4, 2);
  u(0, 0) = 1.0;
  u(0, 1) = 0.1;
  u(1, 1) = 1.0;
  EXPECT_THROW(Projections{u}, ContractViolation);
  EXPECT_THROW(Projections(CMat::Identity(4, 2)).to_rotated(CVec::Zero(6)), ContractViolation);
}

TEST(Sectors, MatchSpectralProjectionOfExcitationNumber) {
  // Oracle: dense eigenprojection of Σ_m q_m at eigenvalue k.
  Fixture fx(7, 3, 2);
  const CMat Nq = to_dense(lift_one_body(CMat::Identity(7, 7), Side::q, Side::q, fx.P, *fx.basis));
  Eigen::SelfAdjointEigenSolver<CMat> es(Nq);
  std::mt19937_64 rng(3);
  const auto s = random_state(fx.basis, rng);
  for (int k = 0; k <= 3; ++k) {
    CMat Pk = CMat::Zero(fx.basis->size(), fx.basis->size());
    for (int j = 0; j < es.eigenvalues().size(); ++j)
      if (std::abs(es.eigenvalues()[j] - k) < 1e-6) Pk += es.eigenvectors().col(j) * es.eigenvectors().col(j).adjoint();
    EXPECT_LT((sector_project(s, k, fx.P).amp - Pk * s.amp).norm(), 1e-12) << "k=" << k;
  }
}

TEST(Sectors, AgreeWithTensorSpace) {
  Fixture fx(6, 3, 4);
  std::mt19937_64 rng(5);
  const auto s = random_state(fx.basis, rng);
  const tensor::Space sp(6, 3);
  const auto counts = tensor::excitation_counts(sp);
  const CVec T = tensor::embed(sp, *fx.basis, s.amp);
  EXPECT_NEAR(T.norm(), 1.0, 1e-13);
  for (int k = 0; k <= 3; ++k) {
    RVec t = RVec::Zero(4);
    t[k] = 1;
    const CVec lhs = tensor::embed(sp, *fx.basis, sector_project(s, k, fx.P).amp);
    EXPECT_LT((lhs - tensor::apply_table(sp, fx.P.U(), counts, t, T)).norm(), 1e-12);
  }
}

TEST(Sectors, OrthogonalIdempotentComplete) {
  Fixture fx(8, 3, 6);
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = random_state(fx.basis, rng);
    CVec sum = CVec::Zero(s.amp.size());
    double mass = 0.0;
    for (int k = 0; k <= 3; ++k) {
      const auto pk = sector_project(s, k, fx.P);
      sum += pk.amp;
      mass += pk.amp.squaredNorm();
      EXPECT_LT((sector_project(pk, k, fx.P).amp - pk.amp).norm(), 1e-12);
      for (int l = 0; l <= 3; ++l)
        if (l != k) {
          EXPECT_LT(sector_project(pk, l, fx.P).amp.norm(), 1e-12);
        }
    }
    EXPECT_LT((sum - s.amp).norm(), 1e-12);
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
  EXPECT_THROW(sector_project(random_state(fx.basis, rng), 4, fx.P), ContractViolation);
}

TEST(Sectors, SlaterAndSingleExcitation) {
  Fixture fx(8, 3, 8);
  const auto phi = slater_of(fx.u, fx.basis);
  EXPECT_LT((sector_project(phi, 0, fx.P).amp - phi.amp).norm(), 1e-12);
  CMat v = fx.u;
  v.col(1) = fx.P.U().col(5);  // complement vector
  const auto exc = slater_of(v, fx.basis);
  const RVec m = fx.P.sector_masses(exc.amp);
  EXPECT_NEAR(m[1], 1.0, 1e-12);
  EXPECT_LT(m[0] + m[2] + m[3], 1e-12);
}

TEST(Weights, OperatorAlgebra) {
  Fixture fx(8, 3, 9);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ud;
  const auto s = random_state(fx.basis, rng);
  RVec a(4), b(4);
  for (int k = 0; k < 4; ++k) a[k] = ud(rng), b[k] = ud(rng);
  const auto f = weight_custom(a), g = weight_custom(b);
  const auto fg = weight_custom(a.cwiseProduct(b));
  EXPECT_LT((apply_weight(f, apply_weight(g, s, fx.P), fx.P).amp - apply_weight(fg, s, fx.P).amp).norm(), 1e-13);
  EXPECT_LT((apply_weight(weight_custom(RVec::Ones(4)), s, fx.P).amp - s.amp).norm(), 1e-12);
  EXPECT_LT(apply_weight(weight_n(3), slater_of(fx.u, fx.basis), fx.P).amp.norm(), 1e-12);
}

TEST(Alpha, NIdentityAndSlater) {
  Fixture fx(8, 3, 11);
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = random_state(fx.basis, rng);
    const double an = alpha(weight_n(3), s, fx.P).value;
    const double q1 = std::real(single_slot_expectation(CMat::Identity(8, 8), Side::q, Side::q, fx.P, s));
    EXPECT_NEAR(an, q1, 1e-12);
    EXPECT_NEAR(an, std::real((fx.P.q() * rdm1(s)).trace()), 1e-12);
    const double p1 = std::real(single_slot_expectation(CMat::Identity(8, 8), Side::p, Side::p, fx.P, s));
    EXPECT_NEAR(p1 + q1, 1.0, 1e-12);
    for (double g : {1.0 / 6, 0.5}) EXPECT_LE(alpha(weight_m(3, g), s, fx.P).value, std::pow(3.0, 1 - g) * an + 1e-14);
  }
  const auto phi = slater_of(fx.u, fx.basis);
  for (const auto& f : {weight_n(3), weight_w(3, 0.5), weight_custom(RVec::LinSpaced(4, 0.3, 0.9))})
    EXPECT_NEAR(alpha(f, phi, fx.P).value, f(0), 1e-13);
}

TEST(Lift, ExcitationNumberAndShiftRelation) {
  Fixture fx(8, 3, 13);
  std::mt19937_64 rng(14);
  const auto s = random_state(fx.basis, rng);
  for (int k = 0; k <= 3; ++k) {
    const auto pk = sector_project(s, k, fx.P);
    EXPECT_LT((apply_lift(CMat::Identity(8, 8), Side::q, Side::q, fx.P, pk) - k * pk.amp).norm(), 1e-12);
  }
  const CMat A = oracle::random_hermitian(rng, 8) / 8.0;
  RVec t(4);
  std::uniform_real_distribution<double> ud;
  for (int k = 0; k < 4; ++k) t[k] = ud(rng);
  const auto f = weight_custom(t);
  ManyBodyState qap = s;
  qap.amp = apply_lift(A, Side::q, Side::p, fx.P, s);
  const CVec lhs = apply_weight(f, qap, fx.P, -1).amp;
  const CVec rhs = apply_lift(A, Side::q, Side::p, fx.P, apply_weight(f, s, fx.P));
  EXPECT_LT((lhs - rhs).norm(), 1e-12);
  // f̂ commutes with Σ (pAp)_i
  ManyBodyState pap = s;
  pap.amp = apply_lift(A, Side::p, Side::p, fx.P, s);
  EXPECT_LT((apply_weight(f, pap, fx.P).amp - apply_lift(A, Side::p, Side::p, fx.P, apply_weight(f, s, fx.P))).norm(),
            1e-12);
  EXPECT_THROW(lift_one_body(CMat::Identity(4, 4), Side::p, Side::q, fx.P, *fx.basis), ShapeError);
}

TEST(Tensor, LocalOperatorMatchesKronecker) {
  std::mt19937_64 rng(15);
  const tensor::Space sp(3, 3);
  const CMat A = oracle::random_cmat(rng, 3, 3), B = oracle::random_cmat(rng, 9, 9);
  const CVec v = oracle::random_cvec(rng, 27);
  const CMat I3 = CMat::Identity(3, 3);
  EXPECT_LT((tensor::apply_local(sp, A, {1}, v) - tensor::kron(tensor::kron(I3, A), I3) * v).norm(), 1e-12);
  EXPECT_LT((tensor::apply_local(sp, B, {0, 1}, v) - tensor::kron(B, I3) * v).norm(), 1e-12);
  // slots (2, 0): B's leading index is slot 2
  CVec ref = CVec::Zero(27);
  for (int x = 0; x < 27; ++x)
    for (int y2 = 0; y2 < 3; ++y2)
      for (int y0 = 0; y0 < 3; ++y0) {
        const int x0 = x / 9, x1 = (x / 3) % 3, x2 = x % 3;
        ref[x] += B(x2 * 3 + x0, y2 * 3 + y0) * v[y0 * 9 + x1 * 3 + y2];
      }
  EXPECT_LT((tensor::apply_local(sp, B, {2, 0}, v) - ref).norm(), 1e-12);
}

TEST(Tensor, MaskedSectorBlockMatchesKronecker) {
  std::mt19937_64 rng(16);
  const int L = 4, n = 2;
  const tensor::Space sp(L, 3);
  const CMat U = oracle::random_isometry(rng, L, L);
  const CMat phi = U.leftCols(n);
  const CMat p = phi * phi.adjoint(), q = CMat::Identity(L, L) - p;
  const CVec v = oracle::random_cvec(rng, sp.dim);
  const CMat I = CMat::Identity(L, L);
  for (int a = 0; a <= 3; ++a)
    EXPECT_LT((tensor::apply_sector_block(sp, U, n, {0, 1, 2}, a, v) - tensor::sector_block(p, q, 3, a) * v).norm(),
              1e-12);
  for (int a = 0; a <= 2; ++a)
    EXPECT_LT((tensor::apply_sector_block(sp, U, n, {0, 1}, a, v) -
               tensor::kron(tensor::sector_block(p, q, 2, a), I) * v).norm(),
              1e-12);
}

TEST(LemmaSuite, SmallRunHasNoAssertedViolations) {
  LemmaOptions opt;
  opt.trials = 10;
  opt.sizes = {{2, 4}, {3, 6}, {4, 6}};
  const auto rep = lemma_suite(opt);
  for (const auto& c : rep.checks)
    if (c.asserted) {
      EXPECT_EQ(c.violations, 0) << c.name << " " << c.first_counterexample.dump();
    }
  const auto* lit = rep.find("sector_literal_vs_spectral");
  ASSERT_NE(lit, nullptr);
  EXPECT_LT(lit->max_defect, 1e-12);
  ASSERT_NE(rep.find("shift_identity_3slot"), nullptr);
  EXPECT_LT(rep.find("shift_identity_3slot")->max_defect, 1e-12);
  const auto j = rep.to_json();
  EXPECT_EQ(j["asserted_violations"], 0);
  EXPECT_EQ(j["trials_per_size"], 10);
}

TEST(LemmaSuite, WLemmaRegime) {
  EXPECT_TRUE(w_lemma_asserted(3, 1.0 / 6, +3, 2, 3));
  EXPECT_FALSE(w_lemma_asserted(3, 1.0 / 6, -2, 2, 3));
  EXPECT_TRUE(w_lemma_asserted(4, 1.0, -1, 3, 3));
  EXPECT_FALSE(w_lemma_asserted(4, 1.0, 0, 4, 3));
}

TEST(LemmaSuite, RejectsOversizedRuns) {
  LemmaOptions opt;
  opt.sizes = {{5, 8}};
  EXPECT_THROW(lemma_suite(opt), ContractViolation);
}
