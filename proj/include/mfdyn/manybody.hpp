#pragma once
// Exact spinless-fermion dynamics on the lattice in the occupation basis.
//
// Configuration X = {x_1 < … < x_N} ↔ |X⟩ = a†_{x_1} ⋯ a†_{x_N}|0⟩, stored as a
// bitmask. a_y and a†_x pick up (-1)^{#occupied sites below}.

#include <bit>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "mfdyn/gauge.hpp"
#include "mfdyn/krylov.hpp"
#include "mfdyn/model.hpp"

namespace mfdyn {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Mask = std::uint32_t;

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

class ConfigBasis {
 public:
  ConfigBasis(int sites, int N) : L_(sites), N_(N) {
    if (sites < 1 || sites > 32) throw ShapeError("occupation basis supports 1..32 sites");
    if (N < 0 || N > sites) throw ShapeError("particle number out of range");
    std::vector<int> cur;
    enumerate(0, cur);
    index_.reserve(configs_.size() * 2);
    for (int i = 0; i < size(); ++i) index_.emplace(configs_[i], i);
  }

  int sites() const { return L_; }
  int particles() const { return N_; }
  int size() const { return static_cast<int>(configs_.size()); }
  Mask config(int i) const { return configs_[i]; }
  int find(Mask m) const {
    auto it = index_.find(m);
    return it == index_.end() ? -1 : it->second;
  }
  std::vector<int> occupied(int i) const { return occupied_sites(configs_[i]); }

  static std::vector<int> occupied_sites(Mask m) {
    std::vector<int> s;
    while (m) {
      s.push_back(std::countr_zero(m));
      m &= m - 1;
    }
    return s;
  }

 private:
  // Depth-first in increasing site order gives lexicographic site tuples.
  void enumerate(int start, std::vector<int>& cur) {
    if (static_cast<int>(cur.size()) == N_) {
      Mask m = 0;
      for (int s : cur) m |= Mask(1) << s;
      configs_.push_back(m);
      return;
    }
    for (int s = start; s <= L_ - (N_ - static_cast<int>(cur.size())); ++s) {
      cur.push_back(s);
      enumerate(s + 1, cur);
      cur.pop_back();
    }
  }

  int L_, N_;
  std::vector<Mask> configs_;
  std::unordered_map<Mask, int> index_;
};

using BasisPtr = std::shared_ptr<const ConfigBasis>;

inline BasisPtr make_basis(int sites, int N) { return std::make_shared<const ConfigBasis>(sites, N); }

struct ManyBodyState {
  BasisPtr basis;
  CVec amp;
  double t = 0.0;
  bool gauged = false;

  double norm() const { return amp.norm(); }
};

// ---------------------------------------------------------------------------
// Fermionic ladder operations on masks.

inline bool annihilate(Mask& m, int y, int& sign) {
  const Mask b = Mask(1) << y;
  if (!(m & b)) return false;
  if (std::popcount(m & (b - 1)) & 1) sign = -sign;
  m ^= b;
  return true;
}

inline bool create(Mask& m, int x, int& sign) {
  const Mask b = Mask(1) << x;
  if (m & b) return false;
  if (std::popcount(m & (b - 1)) & 1) sign = -sign;
  m |= b;
  return true;
}

// Second-quantized lifts. Callback add(row, col, value) receives ⟨row|Â|col⟩.
//   one-body   Σ_i A_i             = Σ A_{xy} a†_x a_y
//   two-body   Σ_{i<j} B_ij        = ½ Σ B_{(x1x2),(y1y2)} a†_{x1} a†_{x2} a_{y2} a_{y1}
//   three-body Σ_{i<j<k} C_ijk     = (1/6) Σ C a†a†a† a a a
// The multi-slot tensors must be symmetric under simultaneous slot exchange.
template <class Add>
void lift_one_body_visit(const CMat& A, const ConfigBasis& B, Add&& add) {
  const int L = B.sites();
  require_shape(A.rows() == L && A.cols() == L, "one-body matrix does not match the basis");
  for (int c = 0; c < B.size(); ++c) {
    const Mask m0 = B.config(c);
    for (int y : ConfigBasis::occupied_sites(m0)) {
      Mask m1 = m0;
      int s1 = 1;
      annihilate(m1, y, s1);
      for (int x = 0; x < L; ++x) {
        const cplx a = A(x, y);
        if (a == cplx(0.0)) continue;
        Mask m2 = m1;
        int s2 = s1;
        if (!create(m2, x, s2)) continue;
        add(B.find(m2), c, static_cast<double>(s2) * a);
      }
    }
  }
}

template <class Add>
void lift_two_body_visit(const CMat& T2, const ConfigBasis& B, Add&& add, bool diagonal_only = false) {
  const int L = B.sites();
  require_shape(T2.rows() == L * L && T2.cols() == L * L, "two-body matrix does not match the basis");
  for (int c = 0; c < B.size(); ++c) {
    const Mask m0 = B.config(c);
    const auto occ = ConfigBasis::occupied_sites(m0);
    for (int y1 : occ)
      for (int y2 : occ) {
        if (y1 == y2) continue;
        Mask m1 = m0;
        int s1 = 1;
        annihilate(m1, y1, s1);
        annihilate(m1, y2, s1);
        const int col = y1 * L + y2;
        for (int x2 = 0; x2 < L; ++x2) {
          Mask m2 = m1;
          int s2 = s1;
          if (!create(m2, x2, s2)) continue;
          for (int x1 = 0; x1 < L; ++x1) {
            if (diagonal_only && !((x1 == y1 && x2 == y2) || (x1 == y2 && x2 == y1))) continue;
            const cplx b = T2(x1 * L + x2, col);
            if (b == cplx(0.0)) continue;
            Mask m3 = m2;
            int s3 = s2;
            if (!create(m3, x1, s3)) continue;
            add(B.find(m3), c, 0.5 * s3 * b);
          }
        }
      }
  }
}

template <class Add>
void lift_three_body_visit(const CMat& T3, const ConfigBasis& B, Add&& add) {
  const int L = B.sites();
  const int L2 = L * L;
  require_shape(T3.rows() == L2 * L && T3.cols() == L2 * L, "three-body matrix does not match the basis");
  for (int c = 0; c < B.size(); ++c) {
    const Mask m0 = B.config(c);
    const auto occ = ConfigBasis::occupied_sites(m0);
    for (int y1 : occ)
      for (int y2 : occ)
        for (int y3 : occ) {
          if (y1 == y2 || y1 == y3 || y2 == y3) continue;
          Mask m1 = m0;
          int s1 = 1;
          annihilate(m1, y1, s1);
          annihilate(m1, y2, s1);
          annihilate(m1, y3, s1);
          const int col = (y1 * L + y2) * L + y3;
          for (int x3 = 0; x3 < L; ++x3) {
            Mask m2 = m1;
            int s2 = s1;
            if (!create(m2, x3, s2)) continue;
            for (int x2 = 0; x2 < L; ++x2) {
              Mask m3 = m2;
              int s3 = s2;
              if (!create(m3, x2, s3)) continue;
              for (int x1 = 0; x1 < L; ++x1) {
                const cplx v = T3((x1 * L + x2) * L + x3, col);
                if (v == cplx(0.0)) continue;
                Mask m4 = m3;
                int s4 = s3;
                if (!create(m4, x1, s4)) continue;
                add(B.find(m4), c, (s4 / 6.0) * v);
              }
            }
          }
        }
  }
}

inline CMat lift_dense_one(const CMat& A, const ConfigBasis& B) {
  CMat M = CMat::Zero(B.size(), B.size());
  lift_one_body_visit(A, B, [&](int r, int c, cplx v) { M(r, c) += v; });
  return M;
}
inline CMat lift_dense_two(const CMat& T2, const ConfigBasis& B) {
  CMat M = CMat::Zero(B.size(), B.size());
  lift_two_body_visit(T2, B, [&](int r, int c, cplx v) { M(r, c) += v; });
  return M;
}
inline CMat lift_dense_three(const CMat& T3, const ConfigBasis& B) {
  CMat M = CMat::Zero(B.size(), B.size());
  lift_three_body_visit(T3, B, [&](int r, int c, cplx v) { M(r, c) += v; });
  return M;
}
inline SpMat lift_sparse_one(const CMat& A, const ConfigBasis& B) {
  std::vector<Eigen::Triplet<cplx>> trip;
  lift_one_body_visit(A, B, [&](int r, int c, cplx v) { trip.emplace_back(r, c, v); });
  SpMat S(B.size(), B.size());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

// Σ_i A_i Ψ without assembling the operator.
inline CVec apply_one_body(const CMat& A, const ManyBodyState& s) {
  CVec out = CVec::Zero(s.amp.size());
  lift_one_body_visit(A, *s.basis, [&](int r, int c, cplx v) { out[r] += v * s.amp[c]; });
  return out;
}

// ---------------------------------------------------------------------------
// Hamiltonian

// Nearest-neighbour lattice (-Δ): (2d δ_xy - δ_<xy>)/h², both neighbours accumulated.
inline CMat lattice_kinetic_matrix(const Grid& g) {
  const int n = g.size();
  const double h2 = g.spacing() * g.spacing();
  CMat T = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T(i, i) += 2.0 * g.dim() / h2;
    auto c = g.coords(i);
    for (int a = 0; a < g.dim(); ++a)
      for (int s : {-1, 1}) {
        auto cn = c;
        cn[a] += s;
        T(i, g.index(cn)) -= 1.0 / h2;
      }
  }
  return T;
}

// Central-difference momentum P_a = -i G_a, G_a u(x) = (u(x+e_a) - u(x-e_a)) / 2h.
inline CMat lattice_momentum_matrix(const Grid& g, int axis) {
  const int n = g.size();
  CMat P = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    auto c = g.coords(i);
    for (int s : {-1, 1}) {
      auto cn = c;
      cn[axis] += s;
      P(i, g.index(cn)) += -I * (0.5 * s / g.spacing());
    }
  }
  return P;
}

inline RVec pair_potential_diagonal(const InteractionPotential& pot, const ConfigBasis& B) {
  RVec d(B.size());
  for (int c = 0; c < B.size(); ++c) {
    const auto occ = B.occupied(c);
    double s = 0.0;
    for (std::size_t i = 0; i < occ.size(); ++i)
      for (std::size_t j = i + 1; j < occ.size(); ++j) s += pot.pair(occ[i], occ[j]);
    d[c] = s;
  }
  return d;
}

struct ManyBodyHamiltonian {
  BasisPtr basis;
  double epsilon = 1.0;
  SpMat eps_H;        // εH, assembled
  RVec pair_diagonal; // Σ_{i<j} v(x_i - x_j) per configuration

  CVec apply(const CVec& v) const { return eps_H * v; }
};

inline ManyBodyHamiltonian build_hamiltonian(const InteractionPotential& pot, const Grid& g, BasisPtr basis,
                                             double epsilon) {
  require_shape(basis->sites() == g.size(), "basis site count differs from grid size");
  require_shape(pot.grid->same_as(g), "potential lives on a different grid");
  ManyBodyHamiltonian H;
  H.basis = basis;
  H.epsilon = epsilon;
  H.pair_diagonal = pair_potential_diagonal(pot, *basis);
  const CMat T = lattice_kinetic_matrix(g);
  std::vector<Eigen::Triplet<cplx>> trip;
  lift_one_body_visit(T, *basis, [&](int r, int c, cplx v) { trip.emplace_back(r, c, epsilon * v); });
  for (int c = 0; c < basis->size(); ++c)
    if (H.pair_diagonal[c] != 0.0) trip.emplace_back(c, c, epsilon * H.pair_diagonal[c]);
  H.eps_H.resize(basis->size(), basis->size());
  H.eps_H.setFromTriplets(trip.begin(), trip.end());
  H.eps_H.makeCompressed();
  return H;
}

inline double energy(const ManyBodyState& s, const ManyBodyHamiltonian& H) {
  return std::real(s.amp.dot(H.apply(s.amp))) / H.epsilon;
}

inline CMat to_dense(const SpMat& S) { return CMat(S); }

// e^{-iτ εH} Φ by Lanczos; tolerance is the error budget relative to ‖Φ‖.
inline ManyBodyState propagate(const ManyBodyState& s, const ManyBodyHamiltonian& H, double t_span,
                               double tol = 1e-12, KrylovStats* stats = nullptr) {
  require_shape(s.basis == H.basis || s.basis->size() == H.basis->size(), "state/operator basis mismatch");
  KrylovOptions ko;
  ko.tol = tol;
  const MatVec A = [&](const CVec& v) { return H.apply(v); };
  ManyBodyState out = s;
  out.amp = expm_krylov(A, s.amp, t_span, ko, stats);
  out.t = s.t + t_span;
  return out;
}

// Time-dependent generator: midpoint-frozen exponential steps of e^{-iΔt G(t_mid)}.
using GeneratorAt = std::function<MatVec(double /*t_mid*/)>;

inline ManyBodyState propagate_td(const ManyBodyState& s, const GeneratorAt& gen, double t_span, double dt,
                                  double tol = 1e-12) {
  const auto [n, h] = step_plan(t_span, dt);
  KrylovOptions ko;
  ko.tol = tol;
  ManyBodyState cur = s;
  for (int k = 0; k < n; ++k) {
    const MatVec A = gen(cur.t + 0.5 * h);
    cur.amp = expm_krylov(A, cur.amp, h, ko);
    cur.t += h;
  }
  cur.t = s.t + t_span;
  return cur;
}

// ---------------------------------------------------------------------------
// States

inline ManyBodyState slater_state(const OrbitalSet& orb, BasisPtr basis) {
  require_shape(basis->sites() == orb.grid->size() && basis->particles() == orb.N(),
                "orbital set does not match the configuration basis");
  if (orthonormality_defect(orb) > 1e-8) throw ContractViolation("slater_state requires orthonormal orbitals");
  const CMat u = orb.site_vectors();
  const int N = orb.N();
  ManyBodyState s;
  s.basis = basis;
  s.t = orb.t;
  s.gauged = orb.gauged;
  s.amp.resize(basis->size());
  CMat M(N, N);
  for (int c = 0; c < basis->size(); ++c) {
    const auto occ = basis->occupied(c);
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) M(j, k) = u(occ[j], k);
    s.amp[c] = N ? M.determinant() : cplx(1.0);
  }
  return s;
}

inline ManyBodyState gauge_manybody(const ManyBodyState& s, double t, double epsilon,
                                    const InteractionPotential& pot) {
  ManyBodyState out = s;
  out.gauged = true;
  if (t == 0.0) return out;
  const RVec d = pair_potential_diagonal(pot, *s.basis);
  for (int c = 0; c < s.basis->size(); ++c) out.amp[c] *= std::exp(I * (t * epsilon * d[c]));
  return out;
}

// γ_xy = ⟨Φ, a†_y a_x Φ⟩ / N, Tr γ = 1.
inline CMat rdm1(const ManyBodyState& s) {
  const ConfigBasis& B = *s.basis;
  const int L = B.sites();
  CMat g = CMat::Zero(L, L);
  for (int c = 0; c < B.size(); ++c) {
    if (s.amp[c] == cplx(0.0)) continue;
    const Mask m0 = B.config(c);
    for (int x : ConfigBasis::occupied_sites(m0)) {
      Mask m1 = m0;
      int s1 = 1;
      annihilate(m1, x, s1);
      for (int y = 0; y < L; ++y) {
        Mask m2 = m1;
        int s2 = s1;
        if (!create(m2, y, s2)) continue;
        g(x, y) += static_cast<double>(s2) * std::conj(s.amp[B.find(m2)]) * s.amp[c];
      }
    }
  }
  return g / static_cast<double>(B.particles());
}

inline CMat projector(const OrbitalSet& orb) {
  const CMat u = orb.site_vectors();
  return u * u.adjoint();
}

struct Observation {
  double tr_gamma = 0.0;   // Tr(M γ)
  double tr_p = 0.0;       // N^{-1} Tr(M p)
  double difference = 0.0; // |Tr(Mγ) - N^{-1}Tr(Mp)|
};

inline Observation observe_general(const CMat& M, const CMat& gamma, const CMat& p, int N, bool multiplication = true) {
  if (multiplication) {
    const CMat off = M - CMat(M.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() > 0.0 || M.diagonal().imag().cwiseAbs().maxCoeff() > 0.0)
      throw ContractViolation("multiplication observable must be real and diagonal");
  }
  Observation o;
  o.tr_gamma = std::real((M * gamma).trace());
  o.tr_p = std::real((M * p).trace()) / N;
  o.difference = std::abs(o.tr_gamma - o.tr_p);
  return o;
}

inline Observation observe(const RVec& M, const CMat& gamma, const CMat& p, int N) {
  Observation o;
  o.tr_gamma = std::real((M.cast<cplx>().asDiagonal() * gamma).trace());
  o.tr_p = std::real((M.cast<cplx>().asDiagonal() * p).trace()) / N;
  o.difference = std::abs(o.tr_gamma - o.tr_p);
  return o;
}

inline Observation observe(const RVec& M, const ManyBodyState& s, const OrbitalSet& orb) {
  return observe(M, rdm1(s), projector(orb), orb.N());
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {
inline constexpr char kStateMagic[8] = {'M', 'F', 'D', 'Y', 'N', 'S', 'T', '1'};
}

inline void save_state_binary(const std::string& path, const ManyBodyState& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  const std::uint32_t version = 1, L = s.basis->sites(), N = s.basis->particles(), dim = s.basis->size();
  f.write(detail::kStateMagic, 8);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&L), 4);
  f.write(reinterpret_cast<const char*>(&N), 4);
  f.write(reinterpret_cast<const char*>(&dim), 4);
  f.write(reinterpret_cast<const char*>(&s.t), 8);
  for (int i = 0; i < s.amp.size(); ++i) {
    const double re = s.amp[i].real(), im = s.amp[i].imag();
    f.write(reinterpret_cast<const char*>(&re), 8);
    f.write(reinterpret_cast<const char*>(&im), 8);
  }
}

inline ManyBodyState load_state_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != std::string(detail::kStateMagic, 8)) throw Error(path + ": not a state file");
  std::uint32_t version = 0, L = 0, N = 0, dim = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&L), 4);
  f.read(reinterpret_cast<char*>(&N), 4);
  f.read(reinterpret_cast<char*>(&dim), 4);
  if (version != 1) throw Error(path + ": unsupported version");
  ManyBodyState s;
  s.basis = make_basis(static_cast<int>(L), static_cast<int>(N));
  if (static_cast<std::uint32_t>(s.basis->size()) != dim) throw Error(path + ": corrupt basis descriptor");
  f.read(reinterpret_cast<char*>(&s.t), 8);
  s.amp.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    double re, im;
    f.read(reinterpret_cast<char*>(&re), 8);
    f.read(reinterpret_cast<char*>(&im), 8);
    s.amp[i] = cplx(re, im);
  }
  if (!f) throw Error(path + ": truncated payload");
  return s;
}

inline nlohmann::json state_to_json(const ManyBodyState& s) {
  nlohmann::json j;
  j["sites"] = s.basis->sites();
  j["particles"] = s.basis->particles();
  j["time"] = s.t;
  auto& a = j["amplitudes"] = nlohmann::json::array();
  for (int c = 0; c < s.basis->size(); ++c)
    a.push_back({{"sites", s.basis->occupied(c)}, {"re", s.amp[c].real()}, {"im", s.amp[c].imag()}});
  return j;
}

inline ManyBodyState state_from_json(const nlohmann::json& j) {
  ManyBodyState s;
  s.basis = make_basis(j.at("sites").get<int>(), j.at("particles").get<int>());
  s.t = j.at("time").get<double>();
  s.amp = CVec::Zero(s.basis->size());
  for (const auto& e : j.at("amplitudes")) {
    Mask m = 0;
    for (int x : e.at("sites").get<std::vector<int>>()) m |= Mask(1) << x;
    const int c = s.basis->find(m);
    if (c < 0) throw Error("state JSON names a configuration outside the basis");
    s.amp[c] = cplx(e.at("re").get<double>(), e.at("im").get<double>());
  }
  return s;
}

}  // namespace mfdyn
