#pragma once
// Lanczos approximation of e^{-iτA}v for hermitian A given as a matvec.

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Eigenvalues>

#include "mfdyn/grid.hpp"

namespace mfdyn {

using MatVec = std::function<CVec(const CVec&)>;

struct KrylovOptions {
  double tol = 1e-13;      // error budget for the whole interval, relative to ‖v‖
  int max_dim = 40;
  double min_step = 1e-12; // relative to |τ|
};

struct KrylovStats {
  int substeps = 0;
  int matvecs = 0;
};

inline CVec expm_krylov(const MatVec& A, const CVec& v, double tau, const KrylovOptions& opt = {},
                        KrylovStats* stats = nullptr) {
  if (tau == 0.0) return v;
  const double beta0 = v.norm();
  if (beta0 == 0.0) return v;
  const int n = static_cast<int>(v.size());
  const int mmax = std::max(1, std::min(opt.max_dim, n));
  const double sgn = tau > 0 ? 1.0 : -1.0;
  double remaining = std::abs(tau);
  double step = remaining;
  CVec w = v;
  CMat V(n, mmax + 1);
  while (remaining > 0.0) {
    const double nw = w.norm();
    V.col(0) = w / nw;
    RVec alpha(mmax), beta(mmax);
    int m = 0;
    double beta_next = 0.0;
    for (int j = 0; j < mmax; ++j) {
      CVec z = A(V.col(j));
      if (stats) ++stats->matvecs;
      if (!z.allFinite()) throw NumericalFailure("non-finite value in Krylov matvec");
      alpha[j] = std::real(V.col(j).dot(z));
      // Full reorthogonalization (twice is enough).
      for (int pass = 0; pass < 2; ++pass) z -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * z);
      const double b = z.norm();
      m = j + 1;
      beta[j] = b;
      beta_next = b;
      if (b <= 1e-13 * std::max(1.0, std::abs(alpha[j]))) {
        beta_next = 0.0;
        break;
      }
      V.col(j + 1) = z / b;
    }
    RMat T = RMat::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(T);
    const RMat& Q = es.eigenvectors();
    const RVec& lam = es.eigenvalues();
    double s = std::min(step, remaining);
    CVec y;
    for (;;) {
      CVec c(m);
      for (int j = 0; j < m; ++j) c[j] = std::exp(-I * (sgn * s) * lam[j]) * Q(0, j);
      y = Q.cast<cplx>() * c;
      // ‖error‖ ≤ ∫₀ˢ β_m |e_mᵀ e^{-iσT} e₁| dσ; |y_m| below 1e-15 is roundoff.
      const double ym = std::abs(y[m - 1]);
      const double err = s * beta_next * ym;
      if (beta_next == 0.0 || ym < 1e-15 || err <= opt.tol * s / std::abs(tau)) break;
      s *= 0.5;
      if (s < opt.min_step * std::abs(tau))
        throw NumericalFailure("Krylov step size fell below the minimum (" + std::to_string(s) + ")");
    }
    w = nw * (V.leftCols(m) * y);
    remaining -= s;
    if (remaining < 1e-15 * std::abs(tau)) remaining = 0.0;
    step = (s == step) ? 2.0 * s : s;
    if (stats) ++stats->substeps;
  }
  return w;
}

// Dense reference: e^{-iτA}v by diagonalization (A hermitian).
inline CMat expm_hermitian(const CMat& A, double tau) {
  Eigen::SelfAdjointEigenSolver<CMat> es(A);
  const RVec& lam = es.eigenvalues();
  CVec ph(lam.size());
  for (int j = 0; j < lam.size(); ++j) ph[j] = std::exp(-I * tau * lam[j]);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace mfdyn
