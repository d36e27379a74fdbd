#pragma once
// Interaction potential, scaling parameters, the two initial orbital
// families, and regularity diagnostics of an orbital set.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfdyn/grid.hpp"

namespace mfdyn {

// ---------------------------------------------------------------------------
// Potential

struct PotentialShape {
  enum class Kind { gaussian, cosine_sum } kind = Kind::gaussian;
  double amplitude = 1.0;
  double width = 0.1;
  // cosine_sum: v(x) = c0 + Σ_{m≥1} c_m Σ_a cos(2π m x_a / ℓ)
  std::vector<double> coefficients;

  static PotentialShape gaussian(double a, double w) {
    PotentialShape s;
    s.kind = Kind::gaussian;
    s.amplitude = a;
    s.width = w;
    return s;
  }
  static PotentialShape cosine_sum(std::vector<double> c) {
    PotentialShape s;
    s.kind = Kind::cosine_sum;
    s.coefficients = std::move(c);
    return s;
  }
  static PotentialShape zero() { return cosine_sum({0.0}); }
  static PotentialShape constant(double c) { return cosine_sum({c}); }
};

struct InteractionPotential {
  GridPtr grid;
  RVec v;                    // v(x_i), even
  std::vector<RVec> f;       // f = -∇v, per axis
  std::vector<RVec> f_refl;  // x ↦ f(-x)
  CVec v_hat;

  // (v∗ρ)(x_i) = h^d Σ_j v(x_i - x_j) ρ_j
  RVec mean_field(const RVec& rho) const {
    CVec rh = grid->fft(rho.cast<cplx>());
    return (grid->cell_volume() * grid->ifft(rh.cwiseProduct(v_hat))).real();
  }
  RVec convolve(const RVec& kernel, const RVec& b) const {
    return convolve_periodic(*grid, kernel.cast<cplx>(), b.cast<cplx>()).real();
  }
  CVec convolve(const RVec& kernel, const CVec& b) const {
    return convolve_periodic(*grid, kernel.cast<cplx>(), b);
  }
  double pair(int i, int j) const { return v[grid->difference(i, j)]; }
  double force(int i, int j, int axis) const { return f[axis][grid->difference(i, j)]; }
  bool is_zero_force() const {
    for (const auto& fa : f)
      if (fa.cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
  }
};

namespace detail {
inline double periodic_gauss(double x, double w, double box) {
  x = std::abs(x);  // exact evenness
  double s = 0.0;
  for (int n = -3; n <= 3; ++n) {
    const double y = x + n * box;
    s += std::exp(-y * y / (2.0 * w * w));
  }
  return s;
}
}  // namespace detail

inline InteractionPotential build_potential(const PotentialShape& shape, GridPtr grid) {
  const Grid& g = *grid;
  InteractionPotential P;
  P.grid = grid;
  P.v.resize(g.size());
  const double ell = g.box_length();
  bool analytic_zero_force = false;
  if (shape.kind == PotentialShape::Kind::gaussian) {
    if (!(shape.width >= 3.0 * g.spacing()))
      throw ResolutionError("potential width " + std::to_string(shape.width) +
                            " below 3 grid spacings (" + std::to_string(3.0 * g.spacing()) + ")");
    for (int i = 0; i < g.size(); ++i) {
      double val = shape.amplitude;
      for (int a = 0; a < g.dim(); ++a)
        val *= detail::periodic_gauss(g.displacement(i, a), shape.width, ell);
      P.v[i] = val;
    }
  } else {
    const auto& c = shape.coefficients;
    const int mmax = static_cast<int>(c.size()) - 1;
    if (2 * mmax >= g.sites_per_dim())
      throw ResolutionError("cosine mode beyond the Nyquist frequency of the grid");
    analytic_zero_force = true;
    for (int m = 1; m <= mmax; ++m)
      if (c[m] != 0.0) analytic_zero_force = false;
    for (int i = 0; i < g.size(); ++i) {
      double val = c.empty() ? 0.0 : c[0];
      for (int m = 1; m <= mmax; ++m)
        for (int a = 0; a < g.dim(); ++a)
          val += c[m] * std::cos(2.0 * std::numbers::pi * m * g.displacement(i, a) / ell);
      P.v[i] = val;
    }
  }
  if (!P.v.allFinite()) throw ResolutionError("potential has non-finite samples");
  P.v_hat = g.fft(P.v.cast<cplx>());
  for (int a = 0; a < g.dim(); ++a) {
    RVec fa = analytic_zero_force ? RVec::Zero(g.size())
                                  : RVec((-g.apply_derivative(P.v.cast<cplx>(), a)).real());
    RVec fr(g.size());
    for (int i = 0; i < g.size(); ++i) fr[i] = fa[g.negate(i)];
    P.f.push_back(std::move(fa));
    P.f_refl.push_back(std::move(fr));
  }
  return P;
}

// ---------------------------------------------------------------------------
// Scaling

enum class EpsilonRule { two_thirds, dimension_adapted, fixed };

struct ScalingParams {
  int N = 1;
  double epsilon = 1.0;
  double t_final = 1.0;
  double dt = 1e-3;
};

// two_thirds: N^{-2/3}; dimension_adapted: N^{1/d - 1}; fixed: the given value.
inline double resolve_epsilon(EpsilonRule rule, int N, int dim, double fixed_value = 1.0) {
  switch (rule) {
    case EpsilonRule::two_thirds: return std::pow(static_cast<double>(N), -2.0 / 3.0);
    case EpsilonRule::dimension_adapted: return std::pow(static_cast<double>(N), 1.0 / dim - 1.0);
    case EpsilonRule::fixed: break;
  }
  if (!(fixed_value > 0.0)) throw ContractViolation("epsilon must be positive");
  return fixed_value;
}

inline ScalingParams make_scaling(int N, double epsilon, double t_final = 1.0, double dt = 1e-3) {
  if (N < 1) throw ContractViolation("N must be >= 1");
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
  if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
  return ScalingParams{N, epsilon, t_final, dt};
}

// ---------------------------------------------------------------------------
// Orbitals

// Columns are orbitals φ_k(x_i), normalized as h^d Σ_i |φ_k(x_i)|² = 1.
struct OrbitalSet {
  GridPtr grid;
  CMat phi;
  double t = 0.0;
  ScalingParams scaling;
  bool gauged = false;

  int N() const { return static_cast<int>(phi.cols()); }
  CVec orbital(int k) const { return phi.col(k); }
  // Site-basis coefficients u = h^{d/2} φ (unit vectors in ℂ^{L_tot}).
  CMat site_vectors() const { return std::sqrt(grid->cell_volume()) * phi; }
};

inline CMat gram(const OrbitalSet& s) { return s.grid->cell_volume() * s.phi.adjoint() * s.phi; }

inline double orthonormality_defect(const OrbitalSet& s) {
  const CMat G = gram(s);
  return (G - CMat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

struct InitialFamily {
  enum class Kind { delocalized, localized } kind = Kind::localized;
  double width = 0.06;  // localized bump width (std. deviation)
  // Localized bumps oscillate at k = momentum_quanta · 2π/ℓ along axis 0.
  int momentum_quanta = 0;
};

namespace detail {
// Momentum lattice points sorted by |n|² then lexicographically.
inline std::vector<std::array<int, 3>> lowest_modes(const Grid& g, int N) {
  std::vector<std::array<int, 3>> modes;
  for (int idx = 0; idx < g.size(); ++idx) {
    std::array<int, 3> n{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) {
      const int i = g.coord(idx, a);
      n[a] = i < g.sites_per_dim() / 2 ? i : i - g.sites_per_dim();
    }
    modes.push_back(n);
  }
  std::sort(modes.begin(), modes.end(), [](const auto& x, const auto& y) {
    const int nx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    const int ny = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if (nx != ny) return nx < ny;
    return x < y;
  });
  modes.resize(N);
  return modes;
}
}  // namespace detail

inline double gram_condition(const CMat& G) {
  Eigen::SelfAdjointEigenSolver<CMat> es(G);
  const RVec ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) return INFINITY;
  return ev.maxCoeff() / ev.minCoeff();
}

// Symmetric orthonormalization Φ ↦ Φ G^{-1/2}.
inline CMat lowdin(const CMat& phi, double cell_volume, double cond_limit = 1e8) {
  const CMat G = cell_volume * phi.adjoint() * phi;
  Eigen::SelfAdjointEigenSolver<CMat> es(G);
  const RVec ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0 || ev.maxCoeff() / ev.minCoeff() > cond_limit)
    throw IllConditionedError("Gram matrix condition number exceeds " + std::to_string(cond_limit));
  const CMat Ginvsqrt =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  return phi * Ginvsqrt;
}

inline OrbitalSet make_orbitals(const InitialFamily& fam, int N, GridPtr grid,
                                const ScalingParams& scaling) {
  const Grid& g = *grid;
  if (N < 1 || N > g.size()) throw ContractViolation("N must lie in [1, total sites]");
  OrbitalSet s;
  s.grid = grid;
  s.scaling = scaling;
  s.scaling.N = N;
  s.phi.resize(g.size(), N);
  const double ell = g.box_length();
  if (fam.kind == InitialFamily::Kind::delocalized) {
    const auto modes = detail::lowest_modes(g, N);
    const double amp = 1.0 / std::sqrt(g.volume());
    for (int k = 0; k < N; ++k)
      for (int i = 0; i < g.size(); ++i) {
        double ph = 0.0;
        for (int a = 0; a < g.dim(); ++a)
          ph += 2.0 * std::numbers::pi / ell * modes[k][a] * g.position(i, a);
        s.phi(i, k) = amp * std::exp(I * ph);
      }
    return s;
  }
  // Centers on an equispaced n_c^d lattice, first N in index order.
  int nc = 1;
  while (std::pow(nc, g.dim()) < N) ++nc;
  const double spacing = ell / nc;
  for (int k = 0; k < N; ++k) {
    std::array<double, 3> c{0, 0, 0};
    int rem = k;
    for (int a = 0; a < g.dim(); ++a) {
      c[a] = (rem % nc + 0.5) * spacing;
      rem /= nc;
    }
    for (int i = 0; i < g.size(); ++i) {
      double val = 1.0;
      for (int a = 0; a < g.dim(); ++a) {
        double d = g.position(i, a) - c[a];
        d -= ell * std::round(d / ell);
        val *= detail::periodic_gauss(d, fam.width, ell);
      }
      const double ph =
          2.0 * std::numbers::pi / ell * fam.momentum_quanta * g.position(i, 0);
      s.phi(i, k) = val * std::exp(I * ph);
    }
    s.phi.col(k) /= std::sqrt(g.cell_volume() * s.phi.col(k).squaredNorm());
  }
  s.phi = lowdin(s.phi, g.cell_volume());
  return s;
}

// ---------------------------------------------------------------------------
// Regularity diagnostics

inline RVec density(const OrbitalSet& s) { return s.phi.cwiseAbs2().rowwise().sum(); }

// ρ^∇ = Σ_k |∇φ_k|²
inline RVec rho_grad(const OrbitalSet& s) {
  RVec r = RVec::Zero(s.grid->size());
  for (int k = 0; k < s.N(); ++k)
    for (int a = 0; a < s.grid->dim(); ++a)
      r += s.grid->apply_momentum(s.phi.col(k), a).cwiseAbs2();
  return r;
}

// ρ^Δ = Σ_k |Δφ_k|²
inline RVec rho_lap(const OrbitalSet& s) {
  RVec r = RVec::Zero(s.grid->size());
  for (int k = 0; k < s.N(); ++k) r += s.grid->apply_kinetic(s.phi.col(k)).cwiseAbs2();
  return r;
}

inline double regularity_D(int N, double rho_grad_l1, double rho_lap_l1) {
  const double n = static_cast<double>(N);
  return std::max({std::pow(n, -5.0 / 6.0) * std::sqrt(rho_grad_l1),
                   std::pow(n, -7.0 / 6.0) * std::sqrt(rho_lap_l1), 1.0});
}

struct AssumptionReport {
  double grad_moment = 0.0;      // N^{-5/3} Σ ‖∇φ_k‖²
  double lap_moment = 0.0;       // N^{-7/3} Σ ‖Δφ_k‖²
  double grad_rho_l1 = 0.0;      // ‖∇ρ₀‖₁
  double eps_grad = 0.0;         // ε Σ ‖∇φ_k‖²
  double eps2_lap = 0.0;         // ε² Σ ‖Δφ_k‖²
  double D = 1.0;
};

inline AssumptionReport assumption_diagnostics(const OrbitalSet& s, double epsilon) {
  const Grid& g = *s.grid;
  const double n = s.N();
  AssumptionReport r;
  const double sg = norm_l1(g, rho_grad(s).cast<cplx>());
  const double sl = norm_l1(g, rho_lap(s).cast<cplx>());
  r.grad_moment = std::pow(n, -5.0 / 3.0) * sg;
  r.lap_moment = std::pow(n, -7.0 / 3.0) * sl;
  r.eps_grad = epsilon * sg;
  r.eps2_lap = epsilon * epsilon * sl;
  const CVec rho = density(s).cast<cplx>();
  RVec mag = RVec::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a) mag += g.apply_derivative(rho, a).cwiseAbs2();
  r.grad_rho_l1 = g.cell_volume() * mag.cwiseSqrt().sum();
  r.D = regularity_D(s.N(), sg, sl);
  return r;
}

}  // namespace mfdyn
