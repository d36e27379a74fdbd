#pragma once
// Rescaled Hartree flow  i∂_t φ_k = ε(K + v∗ρ)φ_k  by Strang splitting.

#include <cmath>
#include <functional>
#include <vector>

#include "mfdyn/gauge.hpp"

namespace mfdyn {

inline double hartree_energy(const OrbitalSet& s, const InteractionPotential& pot) {
  const Grid& g = *s.grid;
  double kin = 0.0;
  for (int k = 0; k < s.N(); ++k) {
    const CVec uh = g.fft(s.phi.col(k));
    // Parseval: ⟨u, K u⟩ = h^d / L_tot Σ_k K(k) |û_k|²
    kin += g.cell_volume() / g.size() * (uh.cwiseAbs2().cwiseProduct(g.kinetic_symbol())).sum();
  }
  const RVec rho = density(s);
  return kin + 0.5 * g.cell_volume() * rho.dot(pot.mean_field(rho));
}

inline OrbitalSet hartree_step(const OrbitalSet& s, const InteractionPotential& pot, double dt) {
  const Grid& g = *s.grid;
  const double eps = s.scaling.epsilon;
  const CVec half = (-I * (0.5 * dt * eps) * g.kinetic_symbol().cast<cplx>()).array().exp();
  OrbitalSet out = s;
  for (int k = 0; k < s.N(); ++k) out.phi.col(k) = g.apply_multiplier(s.phi.col(k), half);
  const RVec V = pot.mean_field(density(out));
  const CVec ph = (-I * (dt * eps) * V.cast<cplx>()).array().exp();
  out.phi = ph.asDiagonal() * out.phi;
  for (int k = 0; k < s.N(); ++k) out.phi.col(k) = g.apply_multiplier(out.phi.col(k), half);
  out.t = s.t + dt;
  check_finite(out.phi, "Hartree step");
  return out;
}

struct HartreeDiagnostics {
  double t = 0.0;
  RVec rho, rho_grad, rho_lap;  // ρ^∇, ρ^Δ of the gauged orbitals
  double D = 1.0;
  double D_ungauged = 1.0;
  double energy = 0.0;
  double orthonormality_defect = 0.0;
  double max_norm_defect = 0.0;
  double mass = 0.0;  // ‖ρ‖₁
};

inline HartreeDiagnostics hartree_diagnostics(const OrbitalSet& phi, const InteractionPotential& pot) {
  const Grid& g = *phi.grid;
  HartreeDiagnostics d;
  d.t = phi.t;
  d.rho = density(phi);
  const OrbitalSet psi = phi.gauged ? phi : gauge_orbitals(phi, phi.t, pot);
  d.rho_grad = rho_grad(psi);
  d.rho_lap = rho_lap(psi);
  d.D = regularity_D(phi.N(), g.cell_volume() * d.rho_grad.sum(), g.cell_volume() * d.rho_lap.sum());
  const OrbitalSet& raw = phi;
  d.D_ungauged = regularity_D(phi.N(), g.cell_volume() * rho_grad(raw).sum(),
                              g.cell_volume() * rho_lap(raw).sum());
  d.energy = hartree_energy(phi.gauged ? ungauge_orbitals(phi, pot) : phi, pot);
  d.orthonormality_defect = orthonormality_defect(phi);
  const CMat G = gram(phi);
  for (int k = 0; k < phi.N(); ++k)
    d.max_norm_defect = std::max(d.max_norm_defect, std::abs(std::sqrt(std::real(G(k, k))) - 1.0));
  d.mass = g.cell_volume() * d.rho.sum();
  return d;
}

struct HartreeTrajectory {
  std::vector<OrbitalSet> states;
  std::vector<HartreeDiagnostics> diagnostics;
  double max_orthonormality_defect = 0.0;  // over every step, not only snapshots
  double max_D = 1.0;
};

using HartreeObserver = std::function<void(const OrbitalSet&, const HartreeDiagnostics&)>;

inline HartreeTrajectory run_hartree(const OrbitalSet& initial, const InteractionPotential& pot,
                                     double t_final, double dt, const HartreeObserver& observer = {},
                                     int cadence = 0, bool check_every_step = false) {
  if (initial.gauged) throw ContractViolation("run_hartree expects ungauged orbitals");
  const auto [n, h] = step_plan(t_final, dt);
  const int cad = cadence > 0 ? cadence : snapshot_cadence(t_final, h);
  HartreeTrajectory tr;
  auto record = [&](const OrbitalSet& s) {
    HartreeDiagnostics d = hartree_diagnostics(s, pot);
    tr.max_orthonormality_defect = std::max(tr.max_orthonormality_defect, d.orthonormality_defect);
    tr.max_D = std::max(tr.max_D, d.D);
    if (observer) observer(s, d);
    tr.states.push_back(s);
    tr.diagnostics.push_back(std::move(d));
  };
  record(initial);
  OrbitalSet cur = initial;
  for (int s = 1; s <= n; ++s) {
    cur = hartree_step(cur, pot, h);
    if (s == n) cur.t = initial.t + t_final;
    if (s % cad == 0 || s == n)
      record(cur);
    else if (check_every_step)
      tr.max_orthonormality_defect = std::max(tr.max_orthonormality_defect, orthonormality_defect(cur));
  }
  return tr;
}

// Final state only, no diagnostics.
inline OrbitalSet evolve_hartree(const OrbitalSet& initial, const InteractionPotential& pot,
                                 double t_final, double dt) {
  const auto [n, h] = step_plan(t_final, dt);
  OrbitalSet cur = initial;
  for (int s = 1; s <= n; ++s) cur = hartree_step(cur, pot, h);
  cur.t = initial.t + t_final;
  return cur;
}

}  // namespace mfdyn
