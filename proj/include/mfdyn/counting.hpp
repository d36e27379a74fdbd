#pragma once
// Excitation sectors relative to N reference orbitals, weight operators f̂ and
// their shifts, counting functionals α_f.
//
// Sectors are realized spectrally: rotate the single-particle basis by
// U = [u | complement], so modes 0..N-1 span Ran p; sector k is then "k
// occupied modes ≥ N". The rotation S of the occupation basis is cached per
// Projections instance.

#include <algorithm>
#include <memory>
#include <random>
#include <tuple>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "mfdyn/manybody.hpp"

namespace mfdyn {

// ---------------------------------------------------------------------------
// Weight functions on {0..N}

struct WeightFunction {
  std::string name;
  RVec table;  // f(0..N)
  double gamma = 0.0;

  int N() const { return static_cast<int>(table.size()) - 1; }
  double operator()(int k) const { return table[k]; }

  // f_d(k) = χ_[0,N](k+d) f(k+d)
  RVec shifted(int d) const {
    if (std::abs(d) > N()) throw ContractViolation("shift |d| exceeds N");
    RVec s = RVec::Zero(table.size());
    for (int k = 0; k <= N(); ++k)
      if (k + d >= 0 && k + d <= N()) s[k] = table[k + d];
    return s;
  }
};

inline WeightFunction weight_custom(const RVec& values, std::string name = "custom") {
  if (values.size() < 1) throw ContractViolation("weight table must cover k = 0..N");
  for (int k = 0; k < values.size(); ++k)
    if (!(values[k] >= 0.0 && values[k] <= 1.0)) throw ContractViolation("weights must lie in [0, 1]");
  return {std::move(name), values, 0.0};
}

inline WeightFunction weight_n(int N) {
  RVec t(N + 1);
  for (int k = 0; k <= N; ++k) t[k] = static_cast<double>(k) / N;
  return {"n", t, 1.0};
}

inline WeightFunction weight_ell(int N) {
  RVec t(N + 1);
  for (int k = 0; k <= N; ++k) t[k] = std::sqrt(static_cast<double>(k) / N);
  return {"ell", t, 0.0};
}

// m^(γ)(k) = min{1, k/N^γ}, N^γ real (no rounding).
inline WeightFunction weight_m(int N, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractViolation("gamma must lie in (0, 1]");
  const double Ng = std::pow(static_cast<double>(N), gamma);
  RVec t(N + 1);
  for (int k = 0; k <= N; ++k) t[k] = std::min(1.0, k / Ng);
  return {"m_gamma", t, gamma};
}

inline WeightFunction weight_w(int N, double gamma) {
  WeightFunction m = weight_m(N, gamma);
  return {"w_gamma", RVec::Ones(N + 1) - m.table, gamma};
}

// ℓ^{-1} on Ran(1 - P^(N,0)); zero on the k = 0 sector.
inline RVec ell_inverse_table(int N) {
  RVec t = RVec::Zero(N + 1);
  for (int k = 1; k <= N; ++k) t[k] = std::sqrt(static_cast<double>(N) / k);
  return t;
}

// ---------------------------------------------------------------------------
// Projections

namespace detail {
inline cplx small_det(CMat& a) {
  const int n = static_cast<int>(a.rows());
  cplx det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == cplx(0.0)) return 0.0;
    if (piv != c) {
      a.row(piv).swap(a.row(c));
      det = -det;
    }
    det *= a(c, c);
    for (int r = c + 1; r < n; ++r) {
      const cplx m = a(r, c) / a(c, c);
      for (int k = c + 1; k < n; ++k) a(r, k) -= m * a(c, k);
    }
  }
  return det;
}
}  // namespace detail

// Completes orthonormal u (L×N) to a unitary [u | Q_{:,0..L-N-1}], Q from
// column-pivoted QR of q.
inline CMat completing_unitary(const CMat& u) {
  const int L = static_cast<int>(u.rows()), N = static_cast<int>(u.cols());
  CMat U(L, L);
  U.leftCols(N) = u;
  if (N < L) {
    const CMat q = CMat::Identity(L, L) - u * u.adjoint();
    Eigen::ColPivHouseholderQR<CMat> qr(q);
    const CMat Q = qr.householderQ();
    CMat c = Q.leftCols(L - N);
    c -= u * (u.adjoint() * c);  // roundoff leakage into Ran p
    U.rightCols(L - N) = c;
  }
  return U;
}

class Projections {
 public:
  Projections(const CMat& u, BasisPtr basis = nullptr) : u_(u), basis_(std::move(basis)) {
    L_ = static_cast<int>(u.rows());
    N_ = static_cast<int>(u.cols());
    const CMat G = u.adjoint() * u;
    if ((G - CMat::Identity(N_, N_)).cwiseAbs().maxCoeff() > 1e-8)
      throw ContractViolation("reference orbitals must be orthonormal");
    p_ = u * u.adjoint();
    q_ = CMat::Identity(L_, L_) - p_;
    U_ = completing_unitary(u);
    if (basis_) {
      require_shape(basis_->sites() == L_ && basis_->particles() == N_, "basis does not match the reference orbitals");
      build_rotation();
    }
  }

  static Projections from_orbitals(const OrbitalSet& orb, BasisPtr basis = nullptr) {
    return Projections(orb.site_vectors(), std::move(basis));
  }

  int sites() const { return L_; }
  int N() const { return N_; }
  const CMat& u() const { return u_; }
  const CMat& p() const { return p_; }
  const CMat& q() const { return q_; }
  const CMat& U() const { return U_; }
  const BasisPtr& basis() const { return basis_; }
  const CMat& S() const {
    need_basis();
    return *S_;
  }

  // Ψ_rot(M) = Σ_X conj det U[X, M] Ψ(X)
  CVec to_rotated(const CVec& amp) const {
    need_basis();
    return S_->adjoint() * amp;
  }
  CVec from_rotated(const CVec& amp) const {
    need_basis();
    return *S_ * amp;
  }
  // excitation count of rotated configuration c
  int sector(int c) const { return sector_[c]; }

  RVec sector_masses(const CVec& amp) const {
    const CVec r = to_rotated(amp);
    RVec m = RVec::Zero(N_ + 1);
    for (int c = 0; c < r.size(); ++c) m[sector_[c]] += std::norm(r[c]);
    return m;
  }

  // Σ_k table[k] P^(N,k)
  CVec apply_table(const RVec& table, const CVec& amp) const {
    require_shape(table.size() == N_ + 1, "sector table must have N+1 entries");
    CVec r = to_rotated(amp);
    for (int c = 0; c < r.size(); ++c) r[c] *= table[sector_[c]];
    return from_rotated(r);
  }

 private:
  void need_basis() const {
    if (!basis_) throw ContractViolation("Projections built without a configuration basis");
  }

  void build_rotation() {
    const ConfigBasis& B = *basis_;
    const int dim = B.size();
    auto S = std::make_shared<CMat>(dim, dim);
    std::vector<std::vector<int>> occ(dim);
    for (int c = 0; c < dim; ++c) occ[c] = B.occupied(c);
    CMat sub(N_, N_);
    for (int m = 0; m < dim; ++m)
      for (int x = 0; x < dim; ++x) {
        for (int j = 0; j < N_; ++j)
          for (int k = 0; k < N_; ++k) sub(j, k) = U_(occ[x][j], occ[m][k]);
        (*S)(x, m) = N_ ? detail::small_det(sub) : cplx(1.0);
      }
    S_ = S;
    sector_.resize(dim);
    for (int c = 0; c < dim; ++c) sector_[c] = std::popcount(B.config(c) >> N_);
  }

  int L_ = 0, N_ = 0;
  CMat u_, p_, q_, U_;
  BasisPtr basis_;
  std::shared_ptr<const CMat> S_;
  std::vector<int> sector_;
};

inline ManyBodyState sector_project(const ManyBodyState& s, int k, const Projections& P) {
  if (k < 0 || k > P.N()) throw ContractViolation("sector index out of range");
  RVec t = RVec::Zero(P.N() + 1);
  t[k] = 1.0;
  ManyBodyState out = s;
  out.amp = P.apply_table(t, s.amp);
  return out;
}

inline ManyBodyState apply_weight(const WeightFunction& f, const ManyBodyState& s, const Projections& P, int d = 0) {
  require_shape(f.N() == P.N(), "weight function defined for a different N");
  ManyBodyState out = s;
  out.amp = P.apply_table(d == 0 ? f.table : f.shifted(d), s.amp);
  return out;
}

struct AlphaResult {
  double value = 0.0;
  RVec masses;  // ‖P^(N,k)Ψ‖²
};

inline AlphaResult alpha(const WeightFunction& f, const ManyBodyState& s, const Projections& P) {
  require_shape(f.N() == P.N(), "weight function defined for a different N");
  AlphaResult r;
  r.masses = P.sector_masses(s.amp);
  r.value = f.table.dot(r.masses);
  return r;
}

enum class Side { p, q, id };

inline CMat side_matrix(Side s, const Projections& P) {
  switch (s) {
    case Side::p: return P.p();
    case Side::q: return P.q();
    case Side::id: break;
  }
  return CMat::Identity(P.sites(), P.sites());
}

// Σ_i (left·A·right)_i
inline SpMat lift_one_body(const CMat& A, Side left, Side right, const Projections& P, const ConfigBasis& B) {
  require_shape(A.rows() == P.sites() && A.cols() == P.sites(), "one-body matrix dimension mismatch");
  return lift_sparse_one(side_matrix(left, P) * A * side_matrix(right, P), B);
}

inline CVec apply_lift(const CMat& A, Side left, Side right, const Projections& P, const ManyBodyState& s) {
  return apply_one_body(side_matrix(left, P) * A * side_matrix(right, P), s);
}

// ⟨Ψ, B₁Ψ⟩ = N^{-1}⟨Ψ, Σ_i B_i Ψ⟩ for antisymmetric Ψ.
inline cplx single_slot_expectation(const CMat& A, Side left, Side right, const Projections& P,
                                    const ManyBodyState& s) {
  return s.amp.dot(apply_lift(A, left, right, P, s)) / static_cast<double>(P.N());
}

// ---------------------------------------------------------------------------
// First-quantized tensor space (ℂ^L)^{⊗N}, slot 0 most significant. Used by the
// lemma suite, where products like q₁q₂ on specific slots are needed verbatim.

namespace tensor {

struct Space {
  int L = 0, N = 0;
  long long dim = 1;
  Space(int L_, int N_) : L(L_), N(N_) {
    for (int i = 0; i < N; ++i) dim *= L;
  }
  long long stride(int slot) const {
    long long s = 1;
    for (int i = slot + 1; i < N; ++i) s *= L;
    return s;
  }
  int digit(long long idx, int slot) const { return static_cast<int>((idx / stride(slot)) % L); }
};

// A acts on the slots listed (first listed slot most significant in A's index).
inline CVec apply_local(const Space& sp, const CMat& A, const std::vector<int>& slots, const CVec& v) {
  const int c = static_cast<int>(slots.size());
  long long loc_dim = 1;
  for (int i = 0; i < c; ++i) loc_dim *= sp.L;
  require_shape(A.rows() == loc_dim && A.cols() == loc_dim, "local operator dimension mismatch");
  require_shape(v.size() == sp.dim, "tensor vector dimension mismatch");
  const long long rest_dim = sp.dim / loc_dim;
  std::vector<int> others;
  for (int s = 0; s < sp.N; ++s)
    if (std::find(slots.begin(), slots.end(), s) == slots.end()) others.push_back(s);
  std::vector<long long> loc_off(loc_dim), rest_off(rest_dim);
  for (long long l = 0; l < loc_dim; ++l) {
    long long r = l, off = 0;
    for (int i = c - 1; i >= 0; --i) {
      off += (r % sp.L) * sp.stride(slots[i]);
      r /= sp.L;
    }
    loc_off[l] = off;
  }
  for (long long l = 0; l < rest_dim; ++l) {
    long long r = l, off = 0;
    for (int i = static_cast<int>(others.size()) - 1; i >= 0; --i) {
      off += (r % sp.L) * sp.stride(others[i]);
      r /= sp.L;
    }
    rest_off[l] = off;
  }
  CMat V(loc_dim, rest_dim);
  for (long long r = 0; r < rest_dim; ++r)
    for (long long l = 0; l < loc_dim; ++l) V(l, r) = v[loc_off[l] + rest_off[r]];
  const CMat W = A * V;
  CVec out(sp.dim);
  for (long long r = 0; r < rest_dim; ++r)
    for (long long l = 0; l < loc_dim; ++l) out[loc_off[l] + rest_off[r]] = W(l, r);
  return out;
}

inline CVec apply_all_slots(const Space& sp, const CMat& A, CVec v) {
  for (int s = 0; s < sp.N; ++s) v = apply_local(sp, A, {s}, v);
  return v;
}

// Number of digits ≥ N of each product-basis index (excitation count in the U frame).
inline std::vector<int> excitation_counts(const Space& sp) {
  std::vector<int> k(sp.dim, 0);
  for (long long i = 0; i < sp.dim; ++i)
    for (int s = 0; s < sp.N; ++s) k[i] += sp.digit(i, s) >= sp.N;
  return k;
}

// Σ_k table[k] P^(N,k) in tensor space.
inline CVec apply_table(const Space& sp, const CMat& U, const std::vector<int>& counts, const RVec& table,
                        const CVec& v) {
  CVec r = apply_all_slots(sp, U.adjoint(), v);
  for (long long i = 0; i < sp.dim; ++i) r[i] *= table[counts[i]];
  return apply_all_slots(sp, U, r);
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

// P^(a) on c slots: sum over slot subsets of size a of q on the subset, p elsewhere.
inline CMat sector_block(const CMat& p, const CMat& q, int c, int a) {
  const long long L = p.rows();
  long long dim = 1;
  for (int i = 0; i < c; ++i) dim *= L;
  CMat acc = CMat::Zero(dim, dim);
  for (int mask = 0; mask < (1 << c); ++mask) {
    if (std::popcount(static_cast<unsigned>(mask)) != a) continue;
    CMat f = CMat::Identity(1, 1);
    for (int i = 0; i < c; ++i) f = kron(f, (mask >> (c - 1 - i)) & 1 ? q : p);
    acc += f;
  }
  return acc;
}

// Same as sector_block(p, q, |slots|, a) applied on the listed slots, with
// p = U diag(1_{m<n_occ}) U†: rotate those slots into the U frame, keep the
// components with exactly a complement modes among them, rotate back.
inline CVec apply_sector_block(const Space& sp, const CMat& U, int n_occ, const std::vector<int>& slots, int a,
                               CVec v) {
  const CMat Ud = U.adjoint();
  for (int s : slots) v = apply_local(sp, Ud, {s}, v);
  for (long long i = 0; i < sp.dim; ++i) {
    int k = 0;
    for (int s : slots) k += sp.digit(i, s) >= n_occ;
    if (k != a) v[i] = 0.0;
  }
  for (int s : slots) v = apply_local(sp, U, {s}, v);
  return v;
}

// Antisymmetric embedding of an occupation-basis state (isometric).
inline CVec embed(const Space& sp, const ConfigBasis& B, const CVec& amp) {
  CVec v = CVec::Zero(sp.dim);
  double fact = 1.0;
  for (int i = 2; i <= sp.N; ++i) fact *= i;
  const double norm = 1.0 / std::sqrt(fact);
  std::vector<int> perm(sp.N);
  for (int c = 0; c < B.size(); ++c) {
    if (amp[c] == cplx(0.0)) continue;
    const auto x = B.occupied(c);
    for (int i = 0; i < sp.N; ++i) perm[i] = i;
    do {
      int inv = 0;
      for (int i = 0; i < sp.N; ++i)
        for (int j = i + 1; j < sp.N; ++j) inv += perm[i] > perm[j];
      long long idx = 0;
      for (int i = 0; i < sp.N; ++i) idx = idx * sp.L + x[perm[i]];
      v[idx] += (inv % 2 ? -norm : norm) * amp[c];
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return v;
}

}  // namespace tensor

// ---------------------------------------------------------------------------
// Lemma suite

struct LemmaCheck {
  std::string name;
  bool asserted = true;
  long long evaluations = 0;
  long long violations = 0;
  double max_defect = 0.0;  // identities: max ‖lhs − rhs‖; inequalities: max (lhs − rhs)
  double max_ratio = 0.0;   // inequalities: max lhs / rhs over rhs > 0
  nlohmann::json first_counterexample;
};

struct LemmaReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<std::pair<int, int>> sizes;  // (N, L)
  std::vector<double> gammas;
  std::vector<LemmaCheck> checks;

  long long asserted_violations() const {
    long long v = 0;
    for (const auto& c : checks)
      if (c.asserted) v += c.violations;
    return v;
  }
  const LemmaCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["trials_per_size"] = trials;
    j["sizes"] = nlohmann::json::array();
    for (auto [N, L] : sizes) j["sizes"].push_back({{"N", N}, {"L", L}});
    j["gammas"] = gammas;
    j["asserted_violations"] = asserted_violations();
    auto& arr = j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json e{{"name", c.name},           {"asserted", c.asserted},   {"evaluations", c.evaluations},
                       {"violations", c.violations}, {"max_defect", c.max_defect}, {"max_ratio", c.max_ratio}};
      if (!c.first_counterexample.is_null()) e["first_counterexample"] = c.first_counterexample;
      arr.push_back(std::move(e));
    }
    return j;
  }
};

struct LemmaOptions {
  std::uint64_t seed = 12345;
  int trials = 200;
  std::vector<std::pair<int, int>> sizes{{3, 8}};
  std::vector<double> gammas{1.0 / 6.0, 0.5, 1.0};
  double identity_tol = 1e-12;
  int max_n0_asserted = 3;
  int max_n0_reported = 6;
  bool identities = true;    // (a) shift identities, factorizations, sector constructions
  bool inequalities = true;  // (b)–(d), D̂/Ê bounds
};

namespace detail {

class CheckBook {
 public:
  LemmaCheck& get(const std::string& name, bool asserted) {
    for (auto& c : checks)
      if (c.name == name) return c;
    checks.push_back({});
    checks.back().name = name;
    checks.back().asserted = asserted;
    return checks.back();
  }
  void identity(const std::string& name, double defect, double tol, const nlohmann::json& ctx) {
    LemmaCheck& c = get(name, true);
    ++c.evaluations;
    c.max_defect = std::max(c.max_defect, defect);
    if (!(defect <= tol)) {
      if (!c.violations) c.first_counterexample = ctx;
      ++c.violations;
    }
  }
  void inequality(const std::string& name, bool asserted, double lhs, double rhs, const nlohmann::json& ctx) {
    LemmaCheck& c = get(name, asserted);
    ++c.evaluations;
    c.max_defect = c.evaluations == 1 ? lhs - rhs : std::max(c.max_defect, lhs - rhs);
    if (rhs > 0) c.max_ratio = std::max(c.max_ratio, lhs / rhs);
    if (!(lhs <= rhs * (1.0 + 1e-10) + 1e-14)) {
      if (!c.violations) {
        c.first_counterexample = ctx;
        c.first_counterexample["lhs"] = lhs;
        c.first_counterexample["rhs"] = rhs;
      }
      ++c.violations;
    }
  }
  std::vector<LemmaCheck> checks;
};

inline CMat normalized_hermitian(std::mt19937_64& rng, long long n) {
  std::normal_distribution<double> nd;
  CMat a(n, n);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  a = 0.5 * (a + a.adjoint());
  return a / a.norm();  // Frobenius ≥ operator norm
}

inline CMat random_isometry(std::mt19937_64& rng, int L, int N) {
  std::normal_distribution<double> nd;
  CMat a(L, N);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < N; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  Eigen::HouseholderQR<CMat> qr(a);
  return qr.householderQ() * CMat::Identity(L, N);
}

inline CVec random_unit(std::mt19937_64& rng, long long n) {
  std::normal_distribution<double> nd;
  CVec v(n);
  for (long long i = 0; i < n; ++i) v[i] = cplx(nd(rng), nd(rng));
  return v / v.norm();
}

inline std::vector<int> random_slots(std::mt19937_64& rng, int N, int c) {
  std::vector<int> all(N);
  for (int i = 0; i < N; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(c);
  return all;
}

inline std::uint64_t trial_seed(std::uint64_t seed, int N, int L, int trial) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (1 + trial + 1000ull * (N + 100ull * L));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Lower-case w-lemma is asserted for −d only when N^γ ≥ (1+√2)d; below that the
// tail k ∈ (N^γ, N^γ + d] of w_{−d} is not captured by the inequality.
inline bool w_lemma_asserted(int N, double gamma, int shift, int n0, int max_n0) {
  if (n0 > max_n0) return false;
  if (shift >= 0) return true;
  return std::pow(static_cast<double>(N), gamma) >= (1.0 + std::sqrt(2.0)) * (-shift);
}

inline LemmaReport lemma_suite(const LemmaOptions& opt = {}) {
  using nlohmann::json;
  LemmaReport rep;
  rep.seed = opt.seed;
  rep.trials = opt.trials;
  rep.sizes = opt.sizes;
  rep.gammas = opt.gammas;
  detail::CheckBook book;

  for (auto [N, L] : opt.sizes) {
    if (N < 1 || N > L || N > 4 || L > 12) throw ContractViolation("lemma suite sizes must satisfy 1 ≤ N ≤ 4, N ≤ L ≤ 12");
    const tensor::Space sp(L, N);
    const auto counts = tensor::excitation_counts(sp);
    const ConfigBasis B(L, N);

    // Literal symmetrized-product P^(N,k) vs spectral construction (tiny instance).
    if (opt.identities && N == 2 && L == 4) {
      std::mt19937_64 rng(detail::trial_seed(opt.seed, N, L, -1));
      const CMat u = detail::random_isometry(rng, L, N);
      const CMat U = completing_unitary(u);
      const CMat p = u * u.adjoint(), q = CMat::Identity(L, L) - p;
      for (int k = 0; k <= N; ++k) {
        const CMat literal = tensor::sector_block(p, q, N, k);
        CMat spectral = CMat::Zero(sp.dim, sp.dim);
        for (long long i = 0; i < sp.dim; ++i) {
          CVec e = CVec::Zero(sp.dim);
          e[i] = 1.0;
          RVec t = RVec::Zero(N + 1);
          t[k] = 1.0;
          spectral.col(i) = tensor::apply_table(sp, U, counts, t, e);
        }
        book.identity("sector_literal_vs_spectral", (literal - spectral).cwiseAbs().maxCoeff(), opt.identity_tol,
                      json{{"N", N}, {"L", L}, {"k", k}});
      }
    }

    for (int trial = 0; trial < opt.trials; ++trial) {
      const std::uint64_t ts = detail::trial_seed(opt.seed, N, L, trial);
      std::mt19937_64 rng(ts);
      const json ctx{{"trial_seed", ts}, {"N", N}, {"L", L}, {"trial", trial}};
      const CMat u = detail::random_isometry(rng, L, N);
      const CMat U = completing_unitary(u);
      const CMat p = u * u.adjoint(), q = CMat::Identity(L, L) - p;
      const CVec psi = tensor::embed(sp, B, detail::random_unit(rng, B.size()));
      auto table = [&](const RVec& t, const CVec& v) { return tensor::apply_table(sp, U, counts, t, v); };
      auto expect = [&](const RVec& t) { return std::real(psi.dot(table(t, psi))); };
      auto q_on = [&](int n, CVec v) {
        for (int i = 0; i < n; ++i) v = tensor::apply_local(sp, q, {i}, v);
        return v;
      };
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      RVec fr(N + 1);
      for (int k = 0; k <= N; ++k) fr[k] = ud(rng);
      const WeightFunction f = weight_custom(fr);

      // (a) shift identity f̂ (P^(a) A P^(b)) = (P^(a) A P^(b)) f̂_{a-b}
      for (int c = 1; opt.identities && c <= std::min(3, N); ++c) {
        const auto slots = detail::random_slots(rng, N, c);
        long long ld = 1;
        for (int i = 0; i < c; ++i) ld *= L;
        const CMat A = detail::normalized_hermitian(rng, ld);
        // X = P^(a) A P^(b) applied factor by factor
        auto Pa = [&](int a, const CVec& v) { return tensor::apply_sector_block(sp, U, N, slots, a, v); };
        auto applyX = [&](int a, int b, const CVec& v) { return Pa(a, tensor::apply_local(sp, A, slots, Pa(b, v))); };
        for (int a = 0; a <= c; ++a)
          for (int b = 0; b <= c; ++b) {
            const CVec lhs = table(f.table, applyX(a, b, psi));
            const CVec rhs = applyX(a, b, table(f.shifted(a - b), psi));
            json cx = ctx;
            cx["slots"] = slots;
            cx["a"] = a;
            cx["b"] = b;
            book.identity("shift_identity_" + std::to_string(c) + "slot", (lhs - rhs).norm(), opt.identity_tol, cx);
          }

        // m̂ − m̂_{−d} factorization against D̂_{−d}, Ê_{−d}
        for (double g : opt.gammas) {
          const WeightFunction m = weight_m(N, g);
          for (int d = 1; d <= c; ++d)
            for (int a = 0; a + d <= c; ++a) {
              RVec diff = m.table - m.shifted(-d), Dt = RVec::Zero(N + 1), Et = RVec::Zero(N + 1);
              for (int k = d; k <= N; ++k) Dt[k] = std::sqrt(std::max(0.0, m.table[k] - m.table[k - d]));
              for (int k = 0; k + d <= N; ++k) Et[k] = std::sqrt(std::max(0.0, m.table[k + d] - m.table[k]));
              const CVec lhs = table(diff, applyX(a + d, a, psi));
              const CVec rhs = table(Dt, applyX(a + d, a, table(Et, psi)));
              json cx = ctx;
              cx["gamma"] = g;
              cx["d"] = d;
              cx["a"] = a;
              book.identity("m_difference_factorization", (lhs - rhs).norm(), opt.identity_tol, cx);
            }
        }
      }

      const RVec ntab = weight_n(N).table;
      auto npow = [&](int e) {
        RVec t(N + 1);
        for (int k = 0; k <= N; ++k) t[k] = std::pow(ntab[k], e);
        return t;
      };

      if (opt.identities) {
        // ℓ̂ ℓ̂^{-1} = 1 on Ran(1 − P^(N,0))
        RVec t0 = RVec::Ones(N + 1);
        t0[0] = 0.0;
        const CVec v = table(t0, psi);
        const RVec linv = ell_inverse_table(N);
        book.identity("ell_inverse_identity", (table(weight_ell(N).table, table(linv, v)) - v).norm(),
                      opt.identity_tol, ctx);
      }
      if (!opt.inequalities) continue;

      // (b) ‖q₁…q_{n₀+1}ψ‖² ≤ 2⟨ψ, n̂^{n₀+1}ψ⟩
      for (int n0 = 1; n0 + 1 <= N && n0 <= opt.max_n0_reported; ++n0) {
        const double lhs = q_on(n0 + 1, psi).squaredNorm();
        json cx = ctx;
        cx["n0"] = n0;
        book.inequality("q_conversion_n0_" + std::to_string(n0), n0 <= opt.max_n0_asserted, lhs,
                        2.0 * expect(npow(n0 + 1)), cx);
      }
      // (c) ‖ℓ̂^{-1} q₁…q_{n₀}ψ‖² ≤ 2⟨ψ, n̂^{n₀−1}ψ⟩
      const RVec linv = ell_inverse_table(N);
      for (int n0 = 1; n0 < N && n0 <= opt.max_n0_reported; ++n0) {
        const double lhs = table(linv, q_on(n0, psi)).squaredNorm();
        json cx = ctx;
        cx["n0"] = n0;
        book.inequality("ell_conversion_n0_" + std::to_string(n0), n0 <= opt.max_n0_asserted, lhs,
                        2.0 * expect(npow(n0 - 1)), cx);
      }
      // (d) ‖q₁…q_{n₀} ŵ_{±d} ψ‖² ≤ 2 N^{n₀(γ−1)} α_{m^(γ)}
      for (double g : opt.gammas) {
        const WeightFunction w = weight_w(N, g), m = weight_m(N, g);
        const double am = expect(m.table);
        for (int d = 0; d <= std::min(3, N); ++d)
          for (int sgn : {+1, -1}) {
            if (d == 0 && sgn < 0) continue;
            const int shift = sgn * d;
            const CVec wpsi = table(w.shifted(shift), psi);
            for (int n0 = 1; n0 <= N && n0 <= opt.max_n0_reported; ++n0) {
              const double lhs = q_on(n0, wpsi).squaredNorm();
              const double rhs = 2.0 * std::pow(static_cast<double>(N), n0 * (g - 1.0)) * am;
              json cx = ctx;
              cx["gamma"] = g;
              cx["shift"] = shift;
              cx["n0"] = n0;
              const bool asserted = w_lemma_asserted(N, g, shift, n0, opt.max_n0_asserted);
              std::string name = "w_estimate_shift" + std::string(shift >= 0 ? "+" : "") + std::to_string(shift);
              if (!asserted) name += "_reported";
              book.inequality(name, asserted, lhs, rhs, cx);
            }
          }

        // D̂/Ê bounds
        for (int d = 1; d <= std::min(3, N); ++d) {
          RVec Dt = RVec::Zero(N + 1), Et = RVec::Zero(N + 1);
          for (int k = d; k <= N; ++k) Dt[k] = std::sqrt(std::max(0.0, m.table[k] - m.table[k - d]));
          for (int k = 0; k + d <= N; ++k) Et[k] = std::sqrt(std::max(0.0, m.table[k + d] - m.table[k]));
          const double Ng = std::pow(static_cast<double>(N), g);
          json cx = ctx;
          cx["gamma"] = g;
          cx["d"] = d;
          for (auto [tab, tag, c1, c2] :
               {std::tuple{Dt, "D", double(d * (d + 1)), double(d * (d + 1) * (d + 1))},
                std::tuple{Et, "E", double(d), double(d)}}) {
            const CVec v = table(tab, psi);
            const std::string base = std::string("weight_") + tag;
            book.inequality(base + "_norm", true, v.squaredNorm(), d / Ng, cx);
            if (N >= 1) book.inequality(base + "_q1", true, q_on(1, v).squaredNorm(), c1 / N * am, cx);
            if (N >= 2)
              book.inequality(base + "_q1q2", true, q_on(2, v).squaredNorm(), c2 * std::pow(N, g - 2.0) * am, cx);
          }
        }
      }
    }
    // n̂ = m̂^(1)
    if (opt.identities)
      book.identity("n_equals_m1", (weight_n(N).table - weight_m(N, 1.0).table).cwiseAbs().maxCoeff(), 0.0,
                  json{{"N", N}});
  }
  rep.checks = std::move(book.checks);
  return rep;
}

}  // namespace mfdyn
