#include <gtest/gtest.h>

#include "mfdyn/grid.hpp"
#include "oracles.hpp"

using namespace mfdyn;

namespace {

Field plane_wave(const GridPtr& g, std::array<int, 3> n) {
  Field u(g);
  for (int i = 0; i < g->size(); ++i) {
    double ph = 0.0;
    for (int a = 0; a < g->dim(); ++a) ph += 2.0 * std::numbers::pi / g->box_length() * n[a] * g->position(i, a);
    u.values[i] = std::exp(I * ph);
  }
  return u;
}

Field random_field(const GridPtr& g, std::mt19937_64& rng) { return Field(g, oracle::random_cvec(rng, g->size())); }

}  // namespace

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(0, 8, 1.0), ShapeError);
  EXPECT_THROW(Grid(4, 8, 1.0), ShapeError);
  EXPECT_THROW(Grid(1, 12, 1.0), ShapeError);
  EXPECT_THROW(Grid(1, 8, -1.0), ShapeError);
  Grid g(2, 8, 2.0);
  EXPECT_EQ(g.size(), 64);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
}

TEST(Grid, MomentumLattice) {
  Grid g(1, 8, 1.0);
  const double k0 = 2.0 * std::numbers::pi;
  EXPECT_DOUBLE_EQ(g.wavenumber(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.wavenumber(3, 0), 3 * k0);
  EXPECT_DOUBLE_EQ(g.wavenumber(4, 0), -4 * k0);
  EXPECT_DOUBLE_EQ(g.wavenumber(7, 0), -k0);
}

TEST(Grid, FftMatchesNaiveDftAndRoundTrips) {
  std::mt19937_64 rng(1);
  auto g = make_grid(1, 16, 1.0);
  CVec u = oracle::random_cvec(rng, 16);
  EXPECT_LT(oracle::max_abs(g->fft(u) - oracle::naive_dft(u)), 1e-12);
  auto g3 = make_grid(3, 8, 1.3);
  CVec w = oracle::random_cvec(rng, g3->size());
  EXPECT_LT((g3->ifft(g3->fft(w)) - w).norm() / w.norm(), 1e-13);
}

TEST(Grid, LaplacianOfPlaneWave) {
  for (int d = 1; d <= 3; ++d) {
    auto g = make_grid(d, 8, 1.7);
    std::array<int, 3> n{2, -1, 3};
    Field u = plane_wave(g, n);
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) k2 += std::pow(2.0 * std::numbers::pi / 1.7 * n[a], 2);
    Field lu = laplacian(u);
    EXPECT_LT((lu.values + k2 * u.values).norm() / (k2 * u.values.norm()), 1e-12) << d;
  }
}

TEST(Grid, LaplacianOfConstantVanishes) {
  auto g = make_grid(2, 8, 1.0);
  Field u(g, CVec::Constant(g->size(), cplx(3.0, -1.0)));
  EXPECT_LT(norm_linf(laplacian(u)), 1e-12);
}

TEST(Grid, KineticQuadraticFormMatchesFourierSum) {
  std::mt19937_64 rng(2);
  auto g = make_grid(2, 8, 1.0);
  Field u = random_field(g, rng);
  const double lhs = std::real(inner(u, Field(g, -laplacian(u).values)));
  // Direct sum over the momentum lattice with a naive 2D DFT.
  double rhs = 0.0;
  const int L = 8;
  for (int k0 = 0; k0 < L; ++k0)
    for (int k1 = 0; k1 < L; ++k1) {
      cplx c = 0.0;
      for (int i = 0; i < g->size(); ++i)
        c += u.values[i] * std::exp(cplx(0, -2.0 * std::numbers::pi * (k0 * g->coord(i, 0) + k1 * g->coord(i, 1)) / L));
      const double kx = 2.0 * std::numbers::pi * (k0 < L / 2 ? k0 : k0 - L);
      const double ky = 2.0 * std::numbers::pi * (k1 < L / 2 ? k1 : k1 - L);
      rhs += (kx * kx + ky * ky) * std::norm(c);
    }
  rhs *= g->cell_volume() / g->size();
  EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
}

TEST(Grid, GradientOfPlaneWave) {
  auto g = make_grid(2, 16, 2.0);
  Field u = plane_wave(g, {3, -2, 0});
  auto gr = gradient(u);
  ASSERT_EQ(gr.size(), 2u);
  const double k0 = std::numbers::pi;
  EXPECT_LT((gr[0].values - I * (3 * k0) * u.values).norm(), 1e-12 * u.values.norm() * 3 * k0);
  EXPECT_LT((gr[1].values - I * (-2 * k0) * u.values).norm(), 1e-12 * u.values.norm() * 2 * k0);
}

TEST(Grid, GradientOfEvenBumpIsOddWithZeroIntegral) {
  auto g = make_grid(1, 64, 1.0);
  Field u(g);
  for (int i = 0; i < g->size(); ++i)
    for (int n = -2; n <= 2; ++n) u.values[i] += std::exp(-std::pow(g->displacement(i, 0) + n, 2) / 0.02);
  Field du = gradient(u)[0];
  for (int i = 1; i < g->size(); ++i) EXPECT_NEAR(std::abs(du.values[i] + du.values[g->negate(i)]), 0.0, 1e-12);
  EXPECT_LT(std::abs(g->cell_volume() * du.values.sum()), 1e-12);
}

TEST(Grid, DivergenceOfGradientIsLaplacianInSpectralMode) {
  std::mt19937_64 rng(3);
  auto g = make_grid(3, 8, 1.0);
  Field u = random_field(g, rng);
  Field a = divergence(gradient(u)), b = laplacian(u);
  EXPECT_LT((a.values - b.values).norm() / b.values.norm(), 1e-12);
}

TEST(Grid, LatticeModeUsesNearestNeighbourStencils) {
  std::mt19937_64 rng(4);
  auto g = make_grid(1, 16, 1.0, DerivativeMode::lattice);
  const double h = g->spacing();
  CVec u = oracle::random_cvec(rng, 16);
  CVec kin = g->apply_kinetic(u), der = g->apply_derivative(u, 0);
  for (int i = 0; i < 16; ++i) {
    const int ip = (i + 1) % 16, im = (i + 15) % 16;
    EXPECT_LT(std::abs(kin[i] - (2.0 * u[i] - u[ip] - u[im]) / (h * h)), 1e-10);
    EXPECT_LT(std::abs(der[i] - (u[ip] - u[im]) / (2 * h)), 1e-11);
  }
}

TEST(Grid, ConvolutionWithDeltaTranslates) {
  std::mt19937_64 rng(5);
  auto g = make_grid(2, 8, 1.0);
  Field rho = random_field(g, rng), delta(g);
  const int s = g->index({3, 5, 0});
  delta.values[s] = 1.0 / g->cell_volume();
  Field c = convolve_periodic(delta, rho);
  for (int i = 0; i < g->size(); ++i)
    EXPECT_LT(std::abs(c.values[i] - rho.values[g->difference(i, s)]), 1e-12);
}

TEST(Grid, ConvolutionWithConstant) {
  std::mt19937_64 rng(6);
  auto g = make_grid(1, 32, 2.0);
  RVec r = RVec::Random(32).cwiseAbs();
  r *= 3.0 / (g->cell_volume() * r.sum());
  Field rho(g, r.cast<cplx>()), c(g, CVec::Constant(32, 0.7));
  EXPECT_LT((convolve_periodic(c, rho).values.array() - 0.7 * 3.0).abs().maxCoeff(), 1e-12);
}

TEST(Grid, GaussianConvolutionAddsVariances) {
  auto g = make_grid(1, 256, 1.0);
  auto gauss = [&](double s2) {
    Field u(g);
    for (int i = 0; i < g->size(); ++i) {
      const double x = g->displacement(i, 0);
      u.values[i] = std::exp(-x * x / (2 * s2)) / std::sqrt(2 * std::numbers::pi * s2);
    }
    return u;
  };
  const double s1 = 0.03 * 0.03, s2 = 0.05 * 0.05;
  Field c = convolve_periodic(gauss(s1), gauss(s2));
  EXPECT_LT((c.values - gauss(s1 + s2).values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Grid, ConvolutionBilinearAndCommutative) {
  std::mt19937_64 rng(7);
  auto g = make_grid(2, 8, 1.0);
  Field a = random_field(g, rng), b = random_field(g, rng), c = random_field(g, rng);
  Field ab = convolve_periodic(a, b), ba = convolve_periodic(b, a);
  EXPECT_LT((ab.values - ba.values).cwiseAbs().maxCoeff(), 1e-13 * ab.values.cwiseAbs().maxCoeff());
  Field lin = convolve_periodic(Field(g, 2.0 * a.values + c.values), b);
  EXPECT_LT((lin.values - 2.0 * ab.values - convolve_periodic(c, b).values).norm(), 1e-12 * lin.values.norm());
}

TEST(Grid, InnerProductAndParseval) {
  std::mt19937_64 rng(8);
  auto g = make_grid(3, 4, 0.8);
  Field u = random_field(g, rng);
  const cplx uu = inner(u, u);
  EXPECT_GE(uu.real(), 0.0);
  EXPECT_EQ(uu.imag(), 0.0);
  const double four = g->cell_volume() / g->size() * g->fft(u.values).squaredNorm();
  EXPECT_NEAR(uu.real(), four, 1e-12 * four);
}

TEST(Grid, MismatchedGridsRejected) {
  auto g1 = make_grid(1, 8, 1.0), g2 = make_grid(1, 16, 1.0);
  Field a(g1), b(g2);
  EXPECT_THROW(convolve_periodic(a, b), ShapeError);
  EXPECT_THROW(inner(a, b), ShapeError);
  EXPECT_THROW(Field(g1, CVec::Zero(5)), ShapeError);
}
