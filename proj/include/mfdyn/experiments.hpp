#pragma once
// The five experiment pipelines behind the command-line tool. Each returns its
// numbers in memory and, given an output directory, writes CSV + sidecars.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfdyn/auxiliary.hpp"
#include "mfdyn/config.hpp"
#include "mfdyn/hartree.hpp"
#include "mfdyn/io.hpp"

namespace mfdyn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Observable dictionary

struct Observable {
  std::string name;
  RVec M;  // diagonal multiplication operator, sup-norm 1
};

using ObservableDictionary = std::vector<Observable>;

// K slabs of equal width along axis 0, plus sin²(2πx₀/ℓ) on the half box x₀ < ℓ/2.
inline ObservableDictionary make_dictionary(const Grid& g, int K = 8, bool bump = true) {
  const int L = g.sites_per_dim();
  if (K < 1 || L % K != 0) throw ConfigError("observable boxes must divide the sites per dimension");
  ObservableDictionary d;
  for (int k = 0; k < K; ++k) {
    Observable o{"box" + std::to_string(k), RVec::Zero(g.size())};
    for (int i = 0; i < g.size(); ++i) {
      const int x0 = g.coords(i)[0];
      if (x0 / (L / K) == k) o.M[i] = 1.0;
    }
    d.push_back(std::move(o));
  }
  if (bump) {
    Observable o{"half_bump", RVec::Zero(g.size())};
    for (int i = 0; i < g.size(); ++i) {
      const double x = g.coords(i)[0] * g.spacing();
      if (x < 0.5 * g.box_length()) o.M[i] = std::pow(std::sin(2.0 * M_PI * x / g.box_length()), 2);
    }
    o.M /= o.M.cwiseAbs().maxCoeff();
    d.push_back(std::move(o));
  }
  return d;
}

inline nlohmann::json describe(const ObservableDictionary& d, int K, bool bump) {
  nlohmann::json j;
  j["kind"] = "finite dictionary of multiplication observables (max over it stands in for the sup over all M)";
  j["boxes"] = K;
  j["box_axis"] = 0;
  j["half_bump"] = bump ? "sin^2(2 pi x0 / box) on x0 < box/2, rescaled to sup-norm 1" : "off";
  std::vector<std::string> names;
  for (const auto& o : d) names.push_back(o.name);
  j["names"] = names;
  return j;
}

struct Comparison {
  double max = 0.0;
  std::vector<double> values;  // |Tr(Mγ) − N⁻¹Tr(Mp)| per observable
};

inline Comparison compare_observables(const ObservableDictionary& d, const CMat& gamma, const CMat& p, int N) {
  Comparison c;
  for (const auto& o : d) {
    const double v = std::abs(observe(o.M, gamma, p, N).difference);
    c.values.push_back(v);
    c.max = std::max(c.max, v);
  }
  return c;
}

// ---------------------------------------------------------------------------

struct Setting {
  GridPtr grid;
  InteractionPotential pot;
  int N = 1;
  double epsilon = 1.0;
  OrbitalSet phi0;
};

inline Setting make_setting(const RunConfig& cfg, int N) {
  Setting s;
  s.grid = cfg.make_grid_ptr();
  s.pot = build_potential(cfg.shape(), s.grid);
  s.N = N;
  s.epsilon = cfg.resolved_epsilon(N);
  s.phi0 = make_orbitals(cfg.family, N, s.grid, make_scaling(N, s.epsilon, cfg.t_final, cfg.dt));
  return s;
}

inline nlohmann::json sidecar_base(const RunConfig& cfg, const std::string& command, int N) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = to_json(cfg);
  if (N > 0) {
    j["N"] = N;
    j["epsilon"] = cfg.resolved_epsilon(N);
  }
  return j;
}

inline std::string tag(int N) { return "N" + std::to_string(N); }

// ---------------------------------------------------------------------------
// hartree

struct HartreeRunResult {
  int N = 0;
  double epsilon = 0.0;
  std::vector<double> t, energy, two_route_distance;
  double max_orthonormality_defect = 0.0;
  double energy_drift = 0.0;  // max |E(t) − E(0)|
  double max_two_route = 0.0;
  double max_continuity_residual = 0.0;
  std::vector<fs::path> files;
};

inline HartreeRunResult run_hartree_experiment(const RunConfig& cfg, int N, const std::optional<fs::path>& out) {
  const Setting S = make_setting(cfg, N);
  HartreeRunResult r;
  r.N = N;
  r.epsilon = S.epsilon;
  const auto tr = run_hartree(S.phi0, S.pot, cfg.t_final, cfg.dt, {}, cfg.cadence, true);
  GaugedOptions go;
  go.cadence = cfg.cadence;
  const auto gauged = run_gauged(gauge_orbitals(S.phi0, 0.0, S.pot), S.pot, cfg.t_final, cfg.dt, go);
  require_shape(gauged.size() == tr.states.size(), "hartree and gauged snapshot counts differ");
  r.max_orthonormality_defect = tr.max_orthonormality_defect;

  std::optional<CsvWriter> csv;
  if (out)
    csv.emplace(*out / ("hartree_" + tag(N) + ".csv"),
                std::vector<std::string>{"t", "energy", "D", "D_ungauged", "orthonormality_defect", "max_norm_defect",
                                         "mass", "two_route_distance"});
  const double cell = S.grid->cell_volume();
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const auto& d = tr.diagnostics[k];
    const OrbitalSet via = gauge_orbitals(tr.states[k], tr.states[k].t, S.pot);
    double dist = 0.0;
    for (int j = 0; j < N; ++j)
      dist = std::max(dist, std::sqrt(cell) * (via.phi.col(j) - gauged[k].phi.col(j)).norm());
    r.t.push_back(d.t);
    r.energy.push_back(d.energy);
    r.two_route_distance.push_back(dist);
    r.energy_drift = std::max(r.energy_drift, std::abs(d.energy - r.energy.front()));
    r.max_two_route = std::max(r.max_two_route, dist);
    if (csv) csv->row({d.t, d.energy, d.D, d.D_ungauged, d.orthonormality_defect, d.max_norm_defect, d.mass, dist});
  }
  if (!out) return r;

  nlohmann::json meta = sidecar_base(cfg, "hartree", N);
  meta["max_orthonormality_defect_all_steps"] = r.max_orthonormality_defect;
  meta["energy_drift"] = r.energy_drift;
  write_sidecar(*csv, meta);
  r.files.push_back(csv->path());

  CsvWriter cont(*out / ("continuity_" + tag(N) + ".csv"), {"t", "residual", "scale"});
  if (gauged.size() >= 3)
    for (const auto& c : continuity_residual(gauged, S.pot)) {
      cont.row({c.t, c.residual, c.scale});
      r.max_continuity_residual = std::max(r.max_continuity_residual, c.residual);
    }
  nlohmann::json cmeta = sidecar_base(cfg, "hartree", N);
  cmeta["description"] = "residual of the continuity relation for v*rho along the directly integrated gauged flow";
  write_sidecar(cont, cmeta);
  r.files.push_back(cont.path());

  const fs::path bin = *out / ("orbitals_" + tag(N) + ".bin");
  save_orbitals_binary(bin, tr.states);
  r.files.push_back(bin);
  return r;
}

// ---------------------------------------------------------------------------
// exact

struct ExactRunResult {
  int N = 0;
  double epsilon = 0.0;
  long long dimension = 0;
  std::vector<double> t, norm, energy;
  double norm_drift = 0.0, energy_drift = 0.0;
  double krylov_vs_dense = -1.0;  // only for dimension ≤ 400
  ManyBodyState final_state;
  std::vector<fs::path> files;
};

inline std::vector<double> snapshot_times(double t_final, double dt, int cadence) {
  const auto [n, h] = step_plan(t_final, dt);
  const int cad = cadence > 0 ? cadence : snapshot_cadence(t_final, h);
  std::vector<double> ts{0.0};
  for (int s = 1; s <= n; ++s)
    if (s % cad == 0 || s == n) ts.push_back(s == n ? t_final : s * h);
  return ts;
}

inline ExactRunResult run_exact_experiment(const RunConfig& cfg, int N, const std::optional<fs::path>& out) {
  require_exact_budget(cfg);
  const Setting S = make_setting(cfg, N);
  auto basis = make_basis(S.grid->size(), N);
  const ManyBodyHamiltonian H = build_hamiltonian(S.pot, *S.grid, basis, S.epsilon);
  const ManyBodyState Phi0 = slater_state(S.phi0, basis);
  const auto dict = make_dictionary(*S.grid, cfg.boxes, cfg.bump);
  ExactRunResult r;
  r.N = N;
  r.epsilon = S.epsilon;
  r.dimension = basis->size();

  std::optional<CsvWriter> csv;
  if (out) {
    std::vector<std::string> cols{"t", "norm", "energy"};
    for (int k = 0; k < S.grid->size(); ++k) cols.push_back("gamma_eig" + std::to_string(k));
    for (const auto& o : dict) cols.push_back("tr_gamma_" + o.name);
    csv.emplace(*out / ("exact_" + tag(N) + ".csv"), cols);
  }
  ManyBodyState Phi = Phi0;
  for (double t : snapshot_times(cfg.t_final, cfg.dt, cfg.cadence)) {
    Phi = propagate(Phi, H, t - Phi.t);
    Phi.t = t;
    const double nrm = Phi.norm(), E = energy(Phi, H);
    r.t.push_back(t);
    r.norm.push_back(nrm);
    r.energy.push_back(E);
    r.norm_drift = std::max(r.norm_drift, std::abs(nrm - 1.0));
    r.energy_drift = std::max(r.energy_drift, std::abs(E - r.energy.front()));
    if (csv) {
      const CMat gamma = rdm1(Phi);
      Eigen::SelfAdjointEigenSolver<CMat> es(gamma, Eigen::EigenvaluesOnly);
      std::vector<double> row{t, nrm, E};
      for (int k = S.grid->size() - 1; k >= 0; --k) row.push_back(es.eigenvalues()[k]);
      for (const auto& o : dict) row.push_back(std::real((o.M.cast<cplx>().asDiagonal() * gamma).trace()));
      csv->row(row);
    }
  }
  if (r.dimension <= 400) {
    const CVec dense = expm_hermitian(to_dense(H.eps_H), cfg.t_final) * Phi0.amp;
    r.krylov_vs_dense = (dense - Phi.amp).norm();
  }
  r.final_state = Phi;
  if (out) {
    nlohmann::json meta = sidecar_base(cfg, "exact", N);
    meta["basis_dimension"] = r.dimension;
    meta["norm_drift"] = r.norm_drift;
    meta["energy_drift"] = r.energy_drift;
    meta["krylov_vs_dense"] = r.krylov_vs_dense >= 0 ? nlohmann::json(r.krylov_vs_dense) : nlohmann::json("skipped (dimension > 400)");
    meta["observables"] = describe(dict, cfg.boxes, cfg.bump);
    write_sidecar(*csv, meta);
    r.files.push_back(csv->path());
    const fs::path bin = *out / ("state_" + tag(N) + ".bin");
    save_state_binary(bin.string(), Phi);
    r.files.push_back(bin);
  }
  return r;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRunResult {
  int N = 0;
  double epsilon = 0.0;
  std::vector<double> t, comparison, comparison_gauged, alpha_n;
  double max_gauge_route_diff = 0.0;
  double initial_comparison = 0.0;
  double final_comparison = 0.0;
  double max_alpha_n = 0.0;
  std::vector<fs::path> files;
};

inline CompareRunResult run_compare_experiment(const RunConfig& cfg, int N, const std::optional<fs::path>& out) {
  require_exact_budget(cfg);
  const Setting S = make_setting(cfg, N);
  auto basis = make_basis(S.grid->size(), N);
  const ManyBodyHamiltonian H = build_hamiltonian(S.pot, *S.grid, basis, S.epsilon);
  const auto dict = make_dictionary(*S.grid, cfg.boxes, cfg.bump);
  CompareRunResult r;
  r.N = N;
  r.epsilon = S.epsilon;

  std::optional<CsvWriter> csv;
  if (out) {
    std::vector<std::string> cols{"t", "comparison_max", "comparison_max_gauged", "gauge_route_diff", "alpha_n"};
    for (const auto& o : dict) cols.push_back("comparison_" + o.name);
    csv.emplace(*out / ("compare_" + tag(N) + ".csv"), cols);
  }
  ManyBodyState Phi = slater_state(S.phi0, basis);
  const CMat Id = CMat::Identity(S.grid->size(), S.grid->size());
  auto visit = [&](const OrbitalSet& phi, const HartreeDiagnostics&) {
    Phi = propagate(Phi, H, phi.t - Phi.t);
    Phi.t = phi.t;
    const CMat gamma = rdm1(Phi), p = projector(phi);
    const Comparison c = compare_observables(dict, gamma, p, N);
    // the same comparison through the gauged pair (Ψ_t, ψ_t)
    const ManyBodyState Psi = gauge_manybody(Phi, phi.t, S.epsilon, S.pot);
    const OrbitalSet psi = gauge_orbitals(phi, phi.t, S.pot);
    const Comparison cg = compare_observables(dict, rdm1(Psi), projector(psi), N);
    double route = 0.0;
    for (std::size_t m = 0; m < dict.size(); ++m) route = std::max(route, std::abs(c.values[m] - cg.values[m]));
    const double an = std::real(((Id - p) * gamma).trace());
    r.t.push_back(phi.t);
    r.comparison.push_back(c.max);
    r.comparison_gauged.push_back(cg.max);
    r.alpha_n.push_back(an);
    r.max_gauge_route_diff = std::max(r.max_gauge_route_diff, route);
    r.max_alpha_n = std::max(r.max_alpha_n, an);
    if (csv) {
      std::vector<double> row{phi.t, c.max, cg.max, route, an};
      row.insert(row.end(), c.values.begin(), c.values.end());
      csv->row(row);
    }
  };
  run_hartree(S.phi0, S.pot, cfg.t_final, cfg.dt, visit, cfg.cadence);
  r.initial_comparison = r.comparison.front();
  r.final_comparison = r.comparison.back();
  if (out) {
    nlohmann::json meta = sidecar_base(cfg, "compare", N);
    meta["observables"] = describe(dict, cfg.boxes, cfg.bump);
    meta["final_comparison"] = r.final_comparison;
    meta["max_alpha_n"] = r.max_alpha_n;
    meta["max_gauge_route_diff"] = r.max_gauge_route_diff;
    if (cfg.mode != DerivativeMode::lattice)
      meta["warning"] = "spectral orbital kinetics against the lattice many-body Laplacian: different models";
    write_sidecar(*csv, meta);
    r.files.push_back(csv->path());
  }
  return r;
}

inline fs::path write_compare_summary(const RunConfig& cfg, const std::vector<CompareRunResult>& runs,
                                      const fs::path& out) {
  CsvWriter w(out / "compare_summary.csv",
              {"N", "epsilon", "comparison_final", "comparison_max_over_t", "alpha_n_final", "alpha_n_max"});
  for (const auto& r : runs)
    w.row({double(r.N), r.epsilon, r.final_comparison, *std::max_element(r.comparison.begin(), r.comparison.end()),
           r.alpha_n.back(), r.max_alpha_n});
  nlohmann::json meta = sidecar_base(cfg, "compare", 0);
  meta["observables"] = describe(make_dictionary(*cfg.make_grid_ptr(), cfg.boxes, cfg.bump), cfg.boxes, cfg.bump);
  write_sidecar(w, meta);
  return w.path();
}

// ---------------------------------------------------------------------------
// aux

struct AuxRunResult {
  int N = 0;
  double epsilon = 0.0;
  std::vector<AuxSample> samples;
  double max_norm_defect = 0.0;
  double initial_distance = 0.0;  // ‖Ψ̃₀ − Φ₀‖
  double max_distance = -1.0;     // max_t ‖Ψ̃_t − Ψ_t‖
  double short_time_slope = -1.0; // C in ‖Ψ̃_t − Ψ_t‖ ≈ C t, fitted on early snapshots
  std::vector<fs::path> files;
};

inline AuxRunResult run_aux_experiment(const RunConfig& cfg, int N, const std::optional<fs::path>& out) {
  require_aux_budget(cfg);
  require_exact_budget(cfg);
  const Setting S = make_setting(cfg, N);
  auto basis = make_basis(S.grid->size(), N);
  const BaseInteractions base = build_base_interactions(S.pot, *S.grid, N >= 3);
  const ManyBodyState Phi0 = slater_state(S.phi0, basis);
  const ManyBodyHamiltonian H = build_hamiltonian(S.pot, *S.grid, basis, S.epsilon);
  AuxOptions opt;
  opt.cadence = cfg.cadence;
  opt.gammas = cfg.gammas;
  if (cfg.aux_exact) {
    opt.exact = &H;
    opt.exact_potential = &S.pot;
  }
  AuxRunResult r;
  r.N = N;
  r.epsilon = S.epsilon;
  r.samples = run_auxiliary(Phi0, gauge_orbitals(S.phi0, 0.0, S.pot), S.pot, base, cfg.t_final, cfg.dt, opt);
  r.initial_distance = (r.samples.front().aux.amp - Phi0.amp).norm();
  double st = 0.0, tt = 0.0;
  int used = 0;
  for (const auto& s : r.samples) {
    r.max_norm_defect = std::max(r.max_norm_defect, s.norm_defect);
    r.max_distance = std::max(r.max_distance, s.distance_to_gauged);
    if (cfg.aux_exact && s.t > 0.0 && s.t <= 0.1 + 1e-12 && used < 5) {
      st += s.t * s.distance_to_gauged;
      tt += s.t * s.t;
      ++used;
    }
  }
  if (used > 0) r.short_time_slope = st / tt;

  if (out) {
    std::vector<std::string> cols{"t", "alpha_n"};
    for (double g : cfg.gammas) cols.push_back("alpha_m_gamma_" + format_double(g));
    for (const char* c : {"beta", "Eg", "bad_kinetic", "norm_diff_aux_gauged", "norm_defect"}) cols.push_back(c);
    CsvWriter w(*out / ("aux_" + tag(N) + ".csv"), cols);
    for (const auto& s : r.samples) {
      std::vector<double> row{s.t, s.energies.alpha_n};
      row.insert(row.end(), s.energies.alpha_m.begin(), s.energies.alpha_m.end());
      for (double v : {s.energies.beta, s.energies.Eg, s.energies.bad_kinetic, s.distance_to_gauged, s.norm_defect})
        row.push_back(v);
      w.row(row);
    }
    nlohmann::json meta = sidecar_base(cfg, "aux", N);
    meta["initial_distance"] = r.initial_distance;
    meta["max_norm_defect"] = r.max_norm_defect;
    meta["norm_diff_aux_gauged"] = cfg.aux_exact ? "||aux - gauge(exact)||" : "-1 (exact flow not co-evolved)";
    if (used > 0) {
      meta["short_time_fit"] = {{"model", "||aux - gauged|| = C t"}, {"C", r.short_time_slope}, {"points", used}};
    }
    write_sidecar(w, meta);
    r.files.push_back(w.path());
  }
  return r;
}

// ---------------------------------------------------------------------------
// lemmas

inline LemmaReport run_lemma_experiment(const RunConfig& cfg, const std::optional<fs::path>& out) {
  LemmaOptions opt;
  opt.seed = cfg.seed;
  opt.trials = cfg.lemma_trials;
  opt.sizes = cfg.lemma_sizes;
  opt.gammas = cfg.gammas;
  opt.max_n0_asserted = cfg.max_n0_asserted;
  opt.max_n0_reported = cfg.max_n0_reported;
  LemmaReport rep = lemma_suite(opt);
  if (out) {
    nlohmann::json j = rep.to_json();
    j["config"] = to_json(cfg);
    write_json(*out / "lemmas.json", j);
  }
  return rep;
}

}  // namespace mfdyn
