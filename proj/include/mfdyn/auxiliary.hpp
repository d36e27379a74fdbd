#pragma once
// Auxiliary truncated generator H̃^g(t): the gauged many-body Hamiltonian with
// every interaction sandwich carrying three or more q's dropped.
//
// Interaction tensors live on ℂ^{L^c} (c = 2, 3 slots, slot 0 most
// significant). Truncation is done in the U frame of the reference orbitals,
// where p and q are 0/1 masks on mode indices: an entry (row, col) of the
// rotated tensor survives iff qcount(row) + qcount(col) ≤ 2. The rotated lift
// is conjugated back to the site basis with the Projections rotation S.

#include <memory>
#include <vector>

#include "mfdyn/counting.hpp"
#include "mfdyn/gauge.hpp"

namespace mfdyn {

inline void require_lattice(const Grid& g, const char* what) {
  if (g.mode() != DerivativeMode::lattice)
    throw ContractViolation(std::string(what) + " requires a lattice-mode grid (shared T)");
}

// ---------------------------------------------------------------------------
// Base interactions

struct BaseInteractions {
  int L = 0;
  CMat w_grad_f;  // L²×L², Σ_a P1 f12 + f12 P1 + P2 f21 + f21 P2
  RVec w_f;       // diagonal on L², Σ_a f12² + f21²
  RVec w_ff;      // diagonal on L³, 2 f12·f13 + 2 f21·f23 + 2 f31·f32
  bool has_three_body = false;
};

inline BaseInteractions build_base_interactions(const InteractionPotential& pot, const Grid& g,
                                                bool with_three_body = true) {
  require_lattice(g, "build_base_interactions");
  const int L = g.size(), d = g.dim();
  BaseInteractions B;
  B.L = L;
  const long long L2 = static_cast<long long>(L) * L;
  B.w_grad_f = CMat::Zero(L2, L2);
  B.w_f = RVec::Zero(L2);
  const CMat I = CMat::Identity(L, L);
  for (int a = 0; a < d; ++a) {
    const CMat P = lattice_momentum_matrix(g, a);
    RVec f12(L2), f21(L2);
    for (int x = 0; x < L; ++x)
      for (int y = 0; y < L; ++y) {
        f12[x * L + y] = pot.force(x, y, a);
        f21[x * L + y] = pot.force(y, x, a);
      }
    const CMat P1 = tensor::kron(P, I), P2 = tensor::kron(I, P);
    const auto D12 = f12.cast<cplx>().asDiagonal();
    const auto D21 = f21.cast<cplx>().asDiagonal();
    B.w_grad_f += P1 * D12;
    B.w_grad_f += D12 * P1;
    B.w_grad_f += P2 * D21;
    B.w_grad_f += D21 * P2;
    B.w_f += f12.cwiseAbs2() + f21.cwiseAbs2();
  }
  if (with_three_body) {
    if (static_cast<long long>(L) * L * L > 4096) throw ContractViolation("three-body tensor over budget (L³ > 4096)");
    B.has_three_body = true;
    B.w_ff = RVec::Zero(L2 * L);
    for (int x = 0; x < L; ++x)
      for (int y = 0; y < L; ++y)
        for (int z = 0; z < L; ++z) {
          double s = 0.0;
          for (int a = 0; a < d; ++a)
            s += 2.0 * pot.force(x, y, a) * pot.force(x, z, a) + 2.0 * pot.force(y, x, a) * pot.force(y, z, a) +
                 2.0 * pot.force(z, x, a) * pot.force(z, y, a);
          B.w_ff[(x * L + y) * L + z] = s;
        }
  }
  return B;
}

// ---------------------------------------------------------------------------
// R, W as one-body matrices

struct RW {
  CMat R, W;
};

inline RW mean_field_RW(const OrbitalSet& psi, const InteractionPotential& pot) {
  const Grid& g = *psi.grid;
  require_lattice(g, "mean_field_RW");
  const MeanFieldForces F = mean_field_forces(psi, pot);
  RW rw;
  rw.R = CMat((F.div_f_avg + F.f_dot_grad_avg).asDiagonal());
  for (int a = 0; a < g.dim(); ++a) {
    const CMat P = lattice_momentum_matrix(g, a);
    const CMat Fb = CMat(F.f_bar[a].cast<cplx>().asDiagonal());
    rw.R += P * Fb + Fb * P;
  }
  rw.W = CMat(W_function(F).cast<cplx>().asDiagonal());
  return rw;
}

// tr₂(p₂ A₁₂ p₂) by explicit partial trace over the standard basis.
inline CMat partial_trace_2(const CMat& A, const CMat& p) {
  const int L = static_cast<int>(p.rows());
  const CMat Ip = tensor::kron(CMat::Identity(L, L), p);
  const CMat M = Ip * A * Ip;
  CMat r = CMat::Zero(L, L);
  for (int x = 0; x < L; ++x)
    for (int y = 0; y < L; ++y)
      for (int z = 0; z < L; ++z) r(x, y) += M(x * L + z, y * L + z);
  return r;
}

// ½ tr₂,₃(p₂p₃ A₁₂₃ p₂p₃), A given as a dense L³×L³ matrix.
inline CMat partial_trace_23(const CMat& A, const CMat& p) {
  const int L = static_cast<int>(p.rows());
  const CMat Ipp = tensor::kron(CMat::Identity(L, L), tensor::kron(p, p));
  const CMat M = Ipp * A * Ipp;
  CMat r = CMat::Zero(L, L);
  const int L2 = L * L;
  for (int x = 0; x < L; ++x)
    for (int y = 0; y < L; ++y)
      for (int z = 0; z < L2; ++z) r(x, y) += M(x * L2 + z, y * L2 + z);
  return 0.5 * r;
}

inline CVec apply_h_tilde_expansion(const Grid& g, const RW& rw, const CVec& u, double t, double eps) {
  return g.apply_kinetic(u) + (t * eps) * (rw.R * u) + (t * t * eps * eps) * (rw.W * u);
}

// ---------------------------------------------------------------------------
// Generator

enum class AuxPart { truncated, discarded, full };

inline const char* to_string(AuxPart p) {
  switch (p) {
    case AuxPart::truncated: return "truncated";
    case AuxPart::discarded: return "discarded";
    case AuxPart::full: return "full";
  }
  return "?";
}

namespace detail {

// (U^{⊗c})† M U^{⊗c}
inline CMat rotate_slots(const CMat& M, const CMat& U, int c) {
  const tensor::Space sp(static_cast<int>(U.rows()), c);
  const CMat Ud = U.adjoint();
  CMat A(M.rows(), M.cols());
  for (int j = 0; j < M.cols(); ++j) A.col(j) = tensor::apply_all_slots(sp, Ud, M.col(j));
  // right multiplication by U^{⊗c}: rows of A times U^{⊗c} = ((U^{⊗c})ᵀ Aᵀ)ᵀ
  const CMat Ut = U.transpose();
  CMat B(M.rows(), M.cols());
  for (int i = 0; i < M.rows(); ++i) B.row(i) = tensor::apply_all_slots(sp, Ut, A.row(i).transpose()).transpose();
  return B;
}

inline std::vector<int> qcounts(int L, int N, int c) {
  const tensor::Space sp(L, c);
  std::vector<int> k(sp.dim, 0);
  for (long long i = 0; i < sp.dim; ++i)
    for (int s = 0; s < c; ++s) k[i] += sp.digit(i, s) >= N;
  return k;
}

inline void mask_part(CMat& M, const std::vector<int>& qc, AuxPart part) {
  if (part == AuxPart::full) return;
  for (int j = 0; j < M.cols(); ++j)
    for (int i = 0; i < M.rows(); ++i) {
      const bool keep = qc[i] + qc[j] <= 2;
      if (keep != (part == AuxPart::truncated)) M(i, j) = 0.0;
    }
}

}  // namespace detail

struct AuxGenerator {
  double t = 0.0;
  double epsilon = 1.0;
  BasisPtr basis;
  AuxPart part = AuxPart::truncated;
  CMat kinetic;      // Σ T_i (site basis)
  CMat interaction;  // tε Σ w̃_∇f + t²ε² Σ (w̃_f + w̃_ff) (site basis)
  double hermiticity_defect = 0.0;

  CMat H() const { return kinetic + interaction; }         // H̃^g
  CMat eps_H() const { return epsilon * (kinetic + interaction); }
  CVec apply(const CVec& v) const { return epsilon * (kinetic * v + interaction * v); }
};

// Reference orbitals ψ_t (gauged, stamped at t) define the projections. With
// part = full the projections play no role and the result is the unprojected
// magnetic-form lattice H^g = T + tε w_∇f + t²ε²(w_f + w_ff).
inline AuxGenerator build_aux_generator(const OrbitalSet& psi, double t, double epsilon, BasisPtr basis,
                                        const BaseInteractions& base, AuxPart part = AuxPart::truncated,
                                        const Projections* cached = nullptr) {
  const Grid& g = *psi.grid;
  require_lattice(g, "build_aux_generator");
  check_time(psi.t, t, "build_aux_generator: stale reference orbitals");
  if (!psi.gauged) throw ContractViolation("build_aux_generator expects gauged reference orbitals");
  const int N = basis->particles(), L = basis->sites();
  require_shape(L == g.size() && N == psi.N() && base.L == L, "aux generator shape mismatch");
  if (N > 3 || (part != AuxPart::full && L > 12)) throw ContractViolation("aux generator over budget (N ≤ 3, L_tot ≤ 12)");
  if (N == 3 && !base.has_three_body) throw ContractViolation("three-body interaction missing from base");

  AuxGenerator G;
  G.t = t;
  G.epsilon = epsilon;
  G.basis = basis;
  G.part = part;
  G.kinetic = lift_dense_one(lattice_kinetic_matrix(g), *basis);
  if (part == AuxPart::discarded) G.kinetic.setZero();
  G.interaction = CMat::Zero(basis->size(), basis->size());
  const double s = t * epsilon;
  if (s == 0.0 || N < 2) return G;

  CMat two = s * base.w_grad_f;
  two.diagonal() += (s * s) * base.w_f.cast<cplx>();
  CMat three;
  if (N >= 3) three = CMat((s * s) * base.w_ff.cast<cplx>().asDiagonal());

  if (part == AuxPart::full) {
    G.interaction = lift_dense_two(two, *basis);
    if (N >= 3) G.interaction += lift_dense_three(three, *basis);
  } else {
    std::unique_ptr<Projections> own;
    const Projections* P = cached;
    if (!P) {
      own = std::make_unique<Projections>(psi.site_vectors(), basis);
      P = own.get();
    }
    const CMat& U = P->U();
    CMat two_rot = detail::rotate_slots(two, U, 2);
    detail::mask_part(two_rot, detail::qcounts(L, N, 2), part);
    CMat rot = lift_dense_two(two_rot, *basis);
    if (N >= 3) {
      CMat three_rot = detail::rotate_slots(three, U, 3);
      detail::mask_part(three_rot, detail::qcounts(L, N, 3), part);
      rot += lift_dense_three(three_rot, *basis);
    }
    // rotated configurations ↔ site configurations
    G.interaction = P->S() * rot * P->S().adjoint();
  }
  const CMat H = G.H();
  G.hermiticity_defect = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (G.hermiticity_defect > 1e-10 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw NumericalFailure("auxiliary generator lost hermiticity");
  return G;
}

// ---------------------------------------------------------------------------
// Energies

struct AuxEnergies {
  double t = 0.0;
  double Eg = 0.0;           // Tr(p h̃ p), h̃ = T + ½tεR + ⅓t²ε²W
  double beta = 0.0;         // εN^{-1}(⟨Ψ̃, H̃^gΨ̃⟩ − E^g)
  double alpha_n = 0.0;
  std::vector<double> alpha_m;  // per γ
  double bad_kinetic = 0.0;  // εN^{-1}⟨Ψ̃, Σ(qTq)_i Ψ̃⟩
};

inline AuxEnergies energies(const ManyBodyState& aux, const OrbitalSet& psi, const AuxGenerator& G,
                            const InteractionPotential& pot, const std::vector<double>& gammas,
                            const Projections* cached = nullptr) {
  const Grid& g = *psi.grid;
  check_time(psi.t, G.t, "energies: orbitals");
  check_time(aux.t, G.t, "energies: state");
  const int N = psi.N();
  const double t = G.t, eps = G.epsilon;
  AuxEnergies e;
  e.t = t;
  const CMat T = lattice_kinetic_matrix(g);
  const RW rw = mean_field_RW(psi, pot);
  const CMat p = projector(psi);
  const CMat ht = T + (0.5 * t * eps) * rw.R + (t * t * eps * eps / 3.0) * rw.W;
  e.Eg = std::real((p * ht * p).trace());
  e.beta = eps / N * (std::real(aux.amp.dot(G.H() * aux.amp)) - e.Eg);
  std::unique_ptr<Projections> own;
  const Projections* P = cached;
  if (!P) {
    own = std::make_unique<Projections>(psi.site_vectors(), aux.basis);
    P = own.get();
  }
  const RVec masses = P->sector_masses(aux.amp);
  e.alpha_n = weight_n(N).table.dot(masses);
  for (double gm : gammas) e.alpha_m.push_back(weight_m(N, gm).table.dot(masses));
  const CMat q = CMat::Identity(g.size(), g.size()) - p;
  e.bad_kinetic = eps / N * std::real(aux.amp.dot(apply_one_body(q * T * q, aux)));
  return e;
}

// ---------------------------------------------------------------------------
// Auxiliary propagation, co-evolving ψ by the gauged Hartree integrator.

struct AuxOptions {
  int cadence = 0;
  GaugedOptions gauged;
  std::vector<double> gammas{1.0 / 6.0, 0.5, 1.0};
  const ManyBodyHamiltonian* exact = nullptr;  // when set, Ψ_t = gauge(Φ_t) is co-evolved
  const InteractionPotential* exact_potential = nullptr;
};

struct AuxSample {
  double t = 0.0;
  ManyBodyState aux;
  OrbitalSet psi;
  AuxEnergies energies;
  double norm_defect = 0.0;
  double distance_to_gauged = -1.0;  // ‖Ψ̃_t − Ψ_t‖ when the exact flow is co-evolved
};

inline std::vector<AuxSample> run_auxiliary(const ManyBodyState& Phi0, const OrbitalSet& psi0,
                                            const InteractionPotential& pot, const BaseInteractions& base,
                                            double t_final, double dt, const AuxOptions& opt = {}) {
  if (!psi0.gauged) throw ContractViolation("run_auxiliary expects gauged orbitals");
  check_time(psi0.t, Phi0.t, "run_auxiliary: initial times");
  const double eps = psi0.scaling.epsilon;
  const auto [n, h] = step_plan(t_final, dt);
  const int cad = opt.cadence > 0 ? opt.cadence : snapshot_cadence(t_final, h);
  std::vector<AuxSample> out;

  ManyBodyState aux = Phi0;  // Ψ̃₀ = Φ₀
  ManyBodyState Phi = Phi0;
  OrbitalSet psi = psi0;
  auto record = [&]() {
    const Projections P(psi.site_vectors(), aux.basis);
    const AuxGenerator G = build_aux_generator(psi, psi.t, eps, aux.basis, base, AuxPart::truncated, &P);
    AuxSample s;
    s.t = aux.t;
    s.aux = aux;
    s.psi = psi;
    s.energies = energies(aux, psi, G, pot, opt.gammas, &P);
    s.norm_defect = std::abs(aux.norm() - 1.0);
    if (opt.exact) {
      const ManyBodyState Psi = gauge_manybody(Phi, Phi.t, eps, *opt.exact_potential);
      s.distance_to_gauged = (aux.amp - Psi.amp).norm();
    }
    out.push_back(std::move(s));
  };
  record();
  for (int k = 1; k <= n; ++k) {
    const double t0 = aux.t;
    OrbitalSet mid = gauged_step(psi, pot, 0.5 * h, opt.gauged);
    mid.t = t0 + 0.5 * h;
    const AuxGenerator G = build_aux_generator(mid, mid.t, eps, aux.basis, base);
    aux.amp = expm_hermitian(G.eps_H(), h) * aux.amp;
    check_finite(aux.amp, "auxiliary step");
    aux.t = (k == n) ? Phi0.t + t_final : t0 + h;
    psi = gauged_step(mid, pot, 0.5 * h, opt.gauged);
    psi.t = aux.t;
    if (opt.exact) Phi = propagate(Phi, *opt.exact, aux.t - Phi.t);
    if (k % cad == 0 || k == n) record();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Magnetic-form residual: ‖i∂_tΨ − εH^g(t)Ψ‖ with Ψ = gauge(Φ), ∂_t by central
// differences of the exact flow. O(h²) on the lattice.

inline double magnetic_residual(const ManyBodyState& Phi, const ManyBodyHamiltonian& H,
                                const InteractionPotential& pot, const BaseInteractions& base, double delta = 1e-4) {
  const double eps = H.epsilon, t = Phi.t;
  const ManyBodyState plus = gauge_manybody(propagate(Phi, H, delta), t + delta, eps, pot);
  const ManyBodyState minus = gauge_manybody(propagate(Phi, H, -delta), t - delta, eps, pot);
  const ManyBodyState Psi = gauge_manybody(Phi, t, eps, pot);
  const CVec dPsi = (plus.amp - minus.amp) / (2.0 * delta);
  OrbitalSet dummy;  // projections are unused for the full operator
  dummy.grid = pot.grid;
  dummy.t = t;
  dummy.gauged = true;
  dummy.phi = CMat::Zero(pot.grid->size(), Phi.basis->particles());
  const AuxGenerator G = build_aux_generator(dummy, t, eps, Phi.basis, base, AuxPart::full);
  return (I * dPsi - G.apply(Psi.amp)).norm();
}

}  // namespace mfdyn
