#pragma once
// Independent reference computations shared by the test suites.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline CVec random_cvec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = cplx(nd(rng), nd(rng));
  return v;
}

inline CVec random_unit(std::mt19937_64& rng, int n) {
  CVec v = random_cvec(rng, n);
  return v / v.norm();
}

inline CMat random_cmat(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> nd;
  CMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

inline CMat random_hermitian(std::mt19937_64& rng, int n) {
  CMat a = random_cmat(rng, n, n);
  return 0.5 * (a + a.adjoint());
}

// n orthonormal columns in ℂ^L via Householder QR.
inline CMat random_isometry(std::mt19937_64& rng, int L, int n) {
  CMat a = random_cmat(rng, L, n);
  Eigen::HouseholderQR<CMat> qr(a);
  return qr.householderQ() * CMat::Identity(L, n);
}

// Direct O(n²) DFT along one axis of a 1D signal: Σ_j u_j e^{-2πi jk/n}.
inline CVec naive_dft(const CVec& u) {
  const int n = static_cast<int>(u.size());
  CVec r = CVec::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      r[k] += u[j] * std::exp(cplx(0, -2.0 * std::numbers::pi * j * k / n));
  return r;
}

inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace oracle
