#pragma once
// Mean-field gauge ψ = e^{itε(v∗ρ)}φ, the force fields entering the gauged
// generator, and direct integration of the gauged Hartree flow.
//
// Sign convention: P = -i∇ is the momentum operator. With f = -∇v the phase
// gradient is ∇(tε v∗ρ) = -tε f̄, so conjugating -Δ gives (P + tε f̄)².

#include <cmath>
#include <functional>
#include <vector>

#include "mfdyn/krylov.hpp"
#include "mfdyn/model.hpp"

namespace mfdyn {

inline void check_time(double stamp, double t, const char* what) {
  if (std::abs(stamp - t) > 1e-12 * std::max(1.0, std::abs(t)))
    throw ContractViolation(std::string(what) + ": time stamp " + std::to_string(stamp) +
                            " does not match requested time " + std::to_string(t));
}

inline OrbitalSet gauge_orbitals(const OrbitalSet& phi, double t, const InteractionPotential& pot) {
  if (phi.gauged) throw ContractViolation("gauge_orbitals expects ungauged orbitals");
  check_time(phi.t, t, "gauge_orbitals");
  OrbitalSet psi = phi;
  psi.gauged = true;
  if (t == 0.0) return psi;
  const RVec V = pot.mean_field(density(phi));
  const CVec phase = (I * (t * phi.scaling.epsilon) * V.cast<cplx>()).array().exp();
  psi.phi = phase.asDiagonal() * phi.phi;
  return psi;
}

// Inverse map, used to compare gauged trajectories against Hartree ones.
inline OrbitalSet ungauge_orbitals(const OrbitalSet& psi, const InteractionPotential& pot) {
  if (!psi.gauged) throw ContractViolation("ungauge_orbitals expects gauged orbitals");
  OrbitalSet phi = psi;
  phi.gauged = false;
  const RVec V = pot.mean_field(density(psi));
  const CVec phase = (-I * (psi.t * psi.scaling.epsilon) * V.cast<cplx>()).array().exp();
  phi.phi = phase.asDiagonal() * psi.phi;
  return phi;
}

struct MeanFieldForces {
  double t = 0.0;
  std::vector<RVec> f_bar;  // f ∗ ρ
  CVec div_f_avg;           // Σ_j ⟨f(·-x)·Pψ_j, ψ_j⟩
  CVec f_dot_grad_avg;      // Σ_j ⟨ψ_j, f(·-x)·Pψ_j⟩
  RVec f_dot_fbar_avg;      // Σ_j ⟨ψ_j, f(·-x)·f̄ ψ_j⟩
};

inline MeanFieldForces mean_field_forces(const OrbitalSet& psi, const InteractionPotential& pot) {
  const Grid& g = *psi.grid;
  const int d = g.dim();
  MeanFieldForces F;
  F.t = psi.t;
  const RVec rho = density(psi);
  F.div_f_avg = CVec::Zero(g.size());
  F.f_dot_grad_avg = CVec::Zero(g.size());
  F.f_dot_fbar_avg = RVec::Zero(g.size());
  for (int a = 0; a < d; ++a) {
    RVec fb = pot.convolve(pot.f[a], rho);
    CVec c = CVec::Zero(g.size()), dd = CVec::Zero(g.size());
    for (int j = 0; j < psi.N(); ++j) {
      const CVec pj = g.apply_momentum(psi.phi.col(j), a);
      c += psi.phi.col(j).conjugate().cwiseProduct(pj);
      dd += pj.conjugate().cwiseProduct(psi.phi.col(j));
    }
    F.f_dot_grad_avg += pot.convolve(pot.f_refl[a], c);
    F.div_f_avg += pot.convolve(pot.f_refl[a], dd);
    F.f_dot_fbar_avg += pot.convolve(pot.f_refl[a], RVec(fb.cwiseProduct(rho)));
    F.f_bar.push_back(std::move(fb));
  }
  return F;
}

// R ψ = Σ_a [P_a(f̄_a ψ) + f̄_a P_a ψ] + (div_f_avg + f_dot_grad_avg) ψ
inline CVec apply_R(const Grid& g, const MeanFieldForces& F, const CVec& u) {
  CVec r = (F.div_f_avg + F.f_dot_grad_avg).cwiseProduct(u);
  for (int a = 0; a < g.dim(); ++a) {
    const CVec fb = F.f_bar[a].cast<cplx>();
    r += g.apply_momentum(fb.cwiseProduct(u), a) + fb.cwiseProduct(g.apply_momentum(u, a));
  }
  return r;
}

// W ψ = (2 f_dot_fbar_avg + f̄·f̄) ψ
inline RVec W_function(const MeanFieldForces& F) {
  RVec w = 2.0 * F.f_dot_fbar_avg;
  for (const auto& fb : F.f_bar) w += fb.cwiseAbs2();
  return w;
}

enum class HgForm { expanded, covariant };

// Expanded:  K + tεR + t²ε²W   (K the grid's kinetic operator).
// Covariant: Σ_a (P_a + tε f̄_a)² + tε(div_f_avg + f_dot_grad_avg + 2tε f_dot_fbar_avg).
// They coincide when Σ_a P_a² = K, i.e. in spectral mode.
inline CVec apply_h_gauged(const Grid& g, const CVec& u, const MeanFieldForces& F, double t,
                           double epsilon, HgForm form = HgForm::expanded) {
  check_time(F.t, t, "apply_h_gauged: stale forces");
  const double s = t * epsilon;
  if (form == HgForm::expanded) {
    CVec r = g.apply_kinetic(u);
    if (s == 0.0) return r;
    r += s * apply_R(g, F, u);
    r += (s * s) * W_function(F).cast<cplx>().cwiseProduct(u);
    return r;
  }
  CVec r = CVec::Zero(u.size());
  for (int a = 0; a < g.dim(); ++a) {
    const CVec fb = (s * F.f_bar[a]).cast<cplx>();
    const CVec w = g.apply_momentum(u, a) + fb.cwiseProduct(u);
    r += g.apply_momentum(w, a) + fb.cwiseProduct(w);
  }
  const CVec scalar = F.div_f_avg + F.f_dot_grad_avg + (2.0 * s) * F.f_dot_fbar_avg.cast<cplx>();
  r += s * scalar.cwiseProduct(u);
  return r;
}

inline Field apply_h_gauged(const Field& u, const MeanFieldForces& F, double t, double epsilon,
                            HgForm form = HgForm::expanded) {
  return Field(u.grid, apply_h_gauged(*u.grid, u.values, F, t, epsilon, form));
}

inline int snapshot_cadence(double t_final, double dt) {
  return std::max(1, static_cast<int>(std::floor(t_final / (100.0 * dt) + 1e-9)));
}

// Number of steps and the step actually used so that n·dt = t_final.
inline std::pair<int, double> step_plan(double t_final, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
  if (t_final < 0.0) throw ContractViolation("t_final must be non-negative");
  const int n = std::max(0, static_cast<int>(std::ceil(t_final / dt - 1e-9)));
  return {n, n ? t_final / n : dt};
}

inline void check_finite(const CMat& m, const char* where) {
  if (!m.allFinite()) throw NumericalFailure(std::string("non-finite values in ") + where);
}

struct GaugedOptions {
  double krylov_tol = 1e-12;
  int cadence = 0;  // 0 → default every max(1, ⌊t_final/(100 dt)⌋) steps
  HgForm form = HgForm::expanded;
};

// One Magnus-midpoint step with force predictor.
inline OrbitalSet gauged_step(const OrbitalSet& psi, const InteractionPotential& pot, double dt,
                              const GaugedOptions& opt = {}) {
  const Grid& g = *psi.grid;
  const double eps = psi.scaling.epsilon;
  KrylovOptions ko;
  ko.tol = opt.krylov_tol;
  auto propagate = [&](const OrbitalSet& in, const MeanFieldForces& F, double tgen, double tau) {
    OrbitalSet out = in;
    const MatVec A = [&](const CVec& u) { return apply_h_gauged(g, u, F, tgen, eps, opt.form); };
    for (int k = 0; k < in.N(); ++k) out.phi.col(k) = expm_krylov(A, in.phi.col(k), eps * tau, ko);
    return out;
  };
  const MeanFieldForces F0 = mean_field_forces(psi, pot);
  OrbitalSet half = propagate(psi, F0, psi.t, 0.5 * dt);
  half.t = psi.t + 0.5 * dt;
  const MeanFieldForces Fm = mean_field_forces(half, pot);
  OrbitalSet next = propagate(psi, Fm, half.t, dt);
  next.t = psi.t + dt;
  check_finite(next.phi, "gauged step");
  return next;
}

inline std::vector<OrbitalSet> run_gauged(const OrbitalSet& initial, const InteractionPotential& pot,
                                          double t_final, double dt, const GaugedOptions& opt = {}) {
  if (!initial.gauged) throw ContractViolation("run_gauged expects gauged orbitals");
  const auto [n, h] = step_plan(t_final, dt);
  const int cad = opt.cadence > 0 ? opt.cadence : snapshot_cadence(t_final, h);
  std::vector<OrbitalSet> traj{initial};
  OrbitalSet cur = initial;
  for (int s = 1; s <= n; ++s) {
    cur = gauged_step(cur, pot, h, opt);
    if (s == n) cur.t = initial.t + t_final;
    if (s % cad == 0 || s == n) traj.push_back(cur);
  }
  return traj;
}

// Residual of -∂_t(v∗ρ) = ε(div_f_avg + f_dot_grad_avg + 2tε f_dot_fbar_avg) at interior
// snapshots (uniform spacing), with ∂_t from central differences.
struct ContinuitySample {
  double t;
  double residual;
  double scale;
};

inline std::vector<ContinuitySample> continuity_residual(const std::vector<OrbitalSet>& traj,
                                                         const InteractionPotential& pot) {
  if (traj.size() < 3) throw ContractViolation("continuity residual needs at least 3 snapshots");
  std::vector<ContinuitySample> out;
  for (std::size_t j = 1; j + 1 < traj.size(); ++j) {
    const OrbitalSet& a = traj[j - 1];
    const OrbitalSet& b = traj[j];
    const OrbitalSet& c = traj[j + 1];
    const double h1 = b.t - a.t, h2 = c.t - b.t;
    if (std::abs(h1 - h2) > 1e-9 * std::max(h1, h2))
      throw ContractViolation("continuity residual needs uniformly spaced snapshots");
    const RVec Va = pot.mean_field(density(a)), Vc = pot.mean_field(density(c));
    const RVec dV = (Vc - Va) / (h1 + h2);
    const OrbitalSet psi = b.gauged ? b : gauge_orbitals(b, b.t, pot);
    const MeanFieldForces F = mean_field_forces(psi, pot);
    const double eps = b.scaling.epsilon;
    const RVec rhs = eps * (F.div_f_avg + F.f_dot_grad_avg).real() +
                     (2.0 * b.t * eps * eps) * F.f_dot_fbar_avg;
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    out.push_back({b.t, (dV + rhs).cwiseAbs().maxCoeff() / scale, scale});
  }
  return out;
}

}  // namespace mfdyn
