#pragma once
// Run configuration: "key = value" lines grouped under [section] headers,
// '#' or ';' starts a comment. Every error names the file and line.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdyn/counting.hpp"
#include "mfdyn/model.hpp"

namespace mfdyn {

struct ConfigEntry {
  std::string value;
  int line = 0;  // 0 → came from --override
  bool used = false;
};

class ConfigDoc {
 public:
  std::string source = "<config>";
  std::map<std::string, ConfigEntry> entries;  // "section.key"

  static ConfigDoc parse(const std::string& text, const std::string& source = "<config>") {
    ConfigDoc d;
    d.source = source;
    std::istringstream in(text);
    std::string raw, section;
    int ln = 0;
    while (std::getline(in, raw)) {
      ++ln;
      std::string s = strip(cut_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') d.fail(ln, "unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty() || !is_ident(section)) d.fail(ln, "bad section name '" + section + "'");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) d.fail(ln, "expected 'key = value'");
      const std::string key = strip(s.substr(0, eq)), val = strip(s.substr(eq + 1));
      if (!is_ident(key)) d.fail(ln, "bad key '" + key + "'");
      if (section.empty()) d.fail(ln, "key '" + key + "' outside any [section]");
      if (val.empty()) d.fail(ln, "empty value for '" + key + "'");
      const std::string full = section + "." + key;
      if (auto it = d.entries.find(full); it != d.entries.end())
        d.fail(ln, "duplicate key '" + full + "' (first set on line " + std::to_string(it->second.line) + ")");
      d.entries[full] = ConfigEntry{val, ln};
    }
    return d;
  }

  static ConfigDoc load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  // "section.key=value"; replaces or adds.
  void override_with(const std::string& kv) {
    const auto eq = kv.find('=');
    const std::string key = strip(kv.substr(0, eq));
    const auto dot = key.find('.');
    if (eq == std::string::npos || dot == std::string::npos || !is_ident(key.substr(0, dot)) ||
        !is_ident(key.substr(dot + 1)))
      throw ConfigError("--override '" + kv + "': expected section.key=value");
    const std::string val = strip(kv.substr(eq + 1));
    if (val.empty()) throw ConfigError("--override '" + kv + "': empty value");
    entries[key] = ConfigEntry{val, 0};
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    if (line > 0) throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
    if (line == 0) throw ConfigError("--override: " + msg);
    throw ConfigError(source + ": " + msg + " (default value)");
  }

  const ConfigEntry* find(const std::string& key) {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  std::string get_string(const std::string& key, const std::string& def) {
    const auto* e = find(key);
    return e ? e->value : def;
  }

  double get_double(const std::string& key, double def) {
    const auto* e = find(key);
    if (!e) return def;
    return parse_number(*e, key, e->value);
  }

  long long get_int(const std::string& key, long long def) {
    const auto* e = find(key);
    if (!e) return def;
    return parse_integer(*e, key, e->value);
  }

  bool get_bool(const std::string& key, bool def) {
    const auto* e = find(key);
    if (!e) return def;
    std::string v = lower(e->value);
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(e->line, key + ": expected a boolean, got '" + e->value + "'");
  }

  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) {
    const auto* e = find(key);
    if (!e) return def;
    std::vector<double> out;
    for (const auto& item : split_list(e->value)) out.push_back(parse_number(*e, key, item));
    if (out.empty()) fail(e->line, key + ": empty list");
    return out;
  }

  std::vector<long long> get_ints(const std::string& key, const std::vector<long long>& def) {
    const auto* e = find(key);
    if (!e) return def;
    std::vector<long long> out;
    for (const auto& item : split_list(e->value)) out.push_back(parse_integer(*e, key, item));
    if (out.empty()) fail(e->line, key + ": empty list");
    return out;
  }

  int line_of(const std::string& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? -1 : it->second.line;
  }

  // Keys nobody asked for are typos until proven otherwise.
  void reject_unused() const {
    for (const auto& [k, e] : entries)
      if (!e.used) fail(e.line, "unknown key '" + k + "'");
  }

  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
      cur = strip(cur);
      if (!cur.empty()) out.push_back(cur);
    }
    return out;
  }

 private:
  static std::string cut_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
  }
  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  }
  static bool is_ident(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
  }

  // Accepts plain numbers and simple fractions "p/q".
  double parse_number(const ConfigEntry& e, const std::string& key, const std::string& text) const {
    auto one = [&](const std::string& t) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        fail(e.line, key + ": expected a number, got '" + text + "'");
      return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return one(strip(text));
    const double den = one(strip(text.substr(slash + 1)));
    if (den == 0.0) fail(e.line, key + ": zero denominator in '" + text + "'");
    return one(strip(text.substr(0, slash))) / den;
  }

  long long parse_integer(const ConfigEntry& e, const std::string& key, const std::string& text) const {
    long long v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      fail(e.line, key + ": expected an integer, got '" + text + "'");
    return v;
  }
};

// ---------------------------------------------------------------------------

struct RunConfig {
  // [grid]
  int dim = 1;
  int sites = 16;
  double box = 1.0;
  DerivativeMode mode = DerivativeMode::lattice;
  // [potential]
  std::string potential = "gaussian";  // gaussian | cosine | zero | constant
  double amplitude = 1.0;
  double width = 0.2;
  std::vector<double> coefficients;
  // [family]
  InitialFamily family;
  // [run]
  std::vector<int> Ns{2};
  EpsilonRule epsilon_rule = EpsilonRule::two_thirds;
  double epsilon = 1.0;  // only for epsilon_rule = fixed
  double t_final = 1.0;
  double dt = 1e-3;
  int cadence = 0;
  std::vector<double> gammas{1.0 / 6.0, 0.5, 1.0};
  std::uint64_t seed = 12345;
  // [observables]
  int boxes = 8;
  bool bump = true;
  // [lemmas]
  int lemma_trials = 200;
  std::vector<std::pair<int, int>> lemma_sizes{{3, 8}};
  int max_n0_asserted = 3;
  int max_n0_reported = 6;
  // [aux]
  bool aux_exact = true;

  std::string source;

  double resolved_epsilon(int N) const { return resolve_epsilon(epsilon_rule, N, dim, epsilon); }

  GridPtr make_grid_ptr() const { return make_grid(dim, sites, box, mode); }

  PotentialShape shape() const {
    if (potential == "gaussian") return PotentialShape::gaussian(amplitude, width);
    if (potential == "zero") return PotentialShape::zero();
    if (potential == "constant") return PotentialShape::constant(amplitude);
    return PotentialShape::cosine_sum(coefficients);
  }

  int total_sites() const {
    int s = 1;
    for (int a = 0; a < dim; ++a) s *= sites;
    return s;
  }
};

inline constexpr long long kMaxBasisDimension = 200000;

inline RunConfig load_run_config(ConfigDoc doc) {
  RunConfig c;
  c.source = doc.source;
  auto where = [&](const std::string& key) { return doc.line_of(key); };

  c.dim = static_cast<int>(doc.get_int("grid.dim", c.dim));
  if (c.dim < 1 || c.dim > 3) doc.fail(where("grid.dim"), "grid.dim must be 1, 2 or 3");
  c.sites = static_cast<int>(doc.get_int("grid.sites", c.sites));
  if (c.sites < 2 || (c.sites & (c.sites - 1)) != 0)
    doc.fail(where("grid.sites"), "grid.sites must be a power of two >= 2");
  c.box = doc.get_double("grid.box", c.box);
  if (!(c.box > 0.0)) doc.fail(where("grid.box"), "grid.box must be positive");
  const std::string mode = doc.get_string("grid.mode", "lattice");
  if (mode == "lattice")
    c.mode = DerivativeMode::lattice;
  else if (mode == "spectral")
    c.mode = DerivativeMode::spectral;
  else
    doc.fail(where("grid.mode"), "grid.mode must be 'lattice' or 'spectral'");

  c.potential = doc.get_string("potential.shape", c.potential);
  if (c.potential != "gaussian" && c.potential != "cosine" && c.potential != "zero" && c.potential != "constant")
    doc.fail(where("potential.shape"), "potential.shape must be gaussian, cosine, zero or constant");
  c.amplitude = doc.get_double("potential.amplitude", c.amplitude);
  c.width = doc.get_double("potential.width", c.width);
  if (!(c.width > 0.0)) doc.fail(where("potential.width"), "potential.width must be positive");
  c.coefficients = doc.get_doubles("potential.coefficients", {0.0});
  if (c.potential == "gaussian" && c.width < 3.0 * c.box / c.sites)
    doc.fail(where("potential.width"), "potential.width under-resolved: needs at least 3 grid spacings (" +
                                           std::to_string(3.0 * c.box / c.sites) + ")");

  const std::string kind = doc.get_string("family.kind", "localized");
  if (kind == "localized")
    c.family.kind = InitialFamily::Kind::localized;
  else if (kind == "delocalized")
    c.family.kind = InitialFamily::Kind::delocalized;
  else
    doc.fail(where("family.kind"), "family.kind must be 'localized' or 'delocalized'");
  c.family.width = doc.get_double("family.width", c.family.width);
  if (!(c.family.width > 0.0)) doc.fail(where("family.width"), "family.width must be positive");
  c.family.momentum_quanta = static_cast<int>(doc.get_int("family.momentum_quanta", 0));

  c.Ns.clear();
  for (long long n : doc.get_ints("run.N", {2})) {
    if (n < 1 || n > 16) doc.fail(where("run.N"), "run.N entries must lie in [1, 16]");
    c.Ns.push_back(static_cast<int>(n));
  }
  const std::string rule = doc.get_string("run.epsilon_rule", "two_thirds");
  if (rule == "two_thirds")
    c.epsilon_rule = EpsilonRule::two_thirds;
  else if (rule == "dimension_adapted")
    c.epsilon_rule = EpsilonRule::dimension_adapted;
  else if (rule == "fixed")
    c.epsilon_rule = EpsilonRule::fixed;
  else
    doc.fail(where("run.epsilon_rule"), "run.epsilon_rule must be two_thirds, dimension_adapted or fixed");
  c.epsilon = doc.get_double("run.epsilon", c.epsilon);
  if (!(c.epsilon > 0.0)) doc.fail(where("run.epsilon"), "run.epsilon must be positive");
  c.t_final = doc.get_double("run.t_final", c.t_final);
  if (c.t_final < 0.0) doc.fail(where("run.t_final"), "run.t_final must be non-negative");
  c.dt = doc.get_double("run.dt", c.dt);
  if (!(c.dt > 0.0)) doc.fail(where("run.dt"), "run.dt must be positive");
  if (c.t_final / c.dt > 1e7) doc.fail(where("run.dt"), "more than 1e7 steps requested");
  c.cadence = static_cast<int>(doc.get_int("run.cadence", 0));
  if (c.cadence < 0) doc.fail(where("run.cadence"), "run.cadence must be >= 0");
  c.gammas = doc.get_doubles("run.gammas", c.gammas);
  for (double g : c.gammas)
    if (!(g > 0.0 && g <= 1.0)) doc.fail(where("run.gammas"), "run.gammas entries must lie in (0, 1]");
  const long long seed = doc.get_int("run.seed", static_cast<long long>(c.seed));
  if (seed < 0) doc.fail(where("run.seed"), "run.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  c.boxes = static_cast<int>(doc.get_int("observables.boxes", c.boxes));
  if (c.boxes < 1 || c.boxes > c.sites || c.sites % c.boxes != 0)
    doc.fail(where("observables.boxes"), "observables.boxes must divide grid.sites");
  c.bump = doc.get_bool("observables.bump", c.bump);

  c.lemma_trials = static_cast<int>(doc.get_int("lemmas.trials", c.lemma_trials));
  if (c.lemma_trials < 1) doc.fail(where("lemmas.trials"), "lemmas.trials must be >= 1");
  if (const auto* e = doc.find("lemmas.sizes")) {
    c.lemma_sizes.clear();
    for (const auto& item : ConfigDoc::split_list(e->value)) {
      int N = 0, L = 0;
      char x = 0;
      std::istringstream in(item);
      if (!(in >> N >> x >> L) || x != 'x' || !in.eof() || N < 1 || N > 4 || L < N || L > 12)
        doc.fail(e->line, "lemmas.sizes: expected entries NxL with 1 <= N <= 4, N <= L <= 12, got '" + item + "'");
      c.lemma_sizes.emplace_back(N, L);
    }
  }
  c.max_n0_asserted = static_cast<int>(doc.get_int("lemmas.max_n0_asserted", c.max_n0_asserted));
  c.max_n0_reported = static_cast<int>(doc.get_int("lemmas.max_n0_reported", c.max_n0_reported));
  if (c.max_n0_asserted < 0 || c.max_n0_reported < c.max_n0_asserted)
    doc.fail(where("lemmas.max_n0_reported"), "need 0 <= max_n0_asserted <= max_n0_reported");

  c.aux_exact = doc.get_bool("aux.exact", c.aux_exact);

  doc.reject_unused();
  return c;
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  ConfigDoc d = path.empty() ? ConfigDoc{} : ConfigDoc::load(path);
  for (const auto& o : overrides) d.override_with(o);
  return load_run_config(std::move(d));
}

// Size checks that depend on the subcommand.
inline void require_exact_budget(const RunConfig& c) {
  for (int N : c.Ns) {
    if (N > c.total_sites()) throw ConfigError("run.N = " + std::to_string(N) + " exceeds the number of sites");
    if (N > 32 || c.total_sites() > 32 || binomial(c.total_sites(), N) > kMaxBasisDimension)
      throw ConfigError("many-body basis over budget for N = " + std::to_string(N) + " on " +
                        std::to_string(c.total_sites()) + " sites");
  }
}

inline void require_aux_budget(const RunConfig& c) {
  if (c.mode != DerivativeMode::lattice) throw ConfigError("aux requires grid.mode = lattice");
  for (int N : c.Ns)
    if (N > 3 || c.total_sites() > 12 || N > c.total_sites())
      throw ConfigError("aux run over budget: needs N <= 3 and at most 12 sites (N = " + std::to_string(N) + ")");
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["grid"] = {{"dim", c.dim}, {"sites", c.sites}, {"box", c.box}, {"mode", to_string(c.mode)}};
  j["potential"] = {{"shape", c.potential}, {"amplitude", c.amplitude}, {"width", c.width},
                    {"coefficients", c.coefficients}};
  j["family"] = {{"kind", c.family.kind == InitialFamily::Kind::localized ? "localized" : "delocalized"},
                 {"width", c.family.width},
                 {"momentum_quanta", c.family.momentum_quanta}};
  const char* rule = c.epsilon_rule == EpsilonRule::two_thirds               ? "two_thirds"
                     : c.epsilon_rule == EpsilonRule::dimension_adapted ? "dimension_adapted"
                                                                        : "fixed";
  nlohmann::json eps = nlohmann::json::object();
  for (int N : c.Ns) eps[std::to_string(N)] = c.resolved_epsilon(N);
  j["run"] = {{"N", c.Ns},           {"epsilon_rule", rule}, {"epsilon", eps},     {"t_final", c.t_final},
              {"dt", c.dt},          {"cadence", c.cadence}, {"gammas", c.gammas}, {"seed", c.seed}};
  j["observables"] = {{"boxes", c.boxes}, {"bump", c.bump}};
  nlohmann::json sizes = nlohmann::json::array();
  for (auto [N, L] : c.lemma_sizes) sizes.push_back({N, L});
  j["lemmas"] = {{"trials", c.lemma_trials},
                 {"sizes", sizes},
                 {"max_n0_asserted", c.max_n0_asserted},
                 {"max_n0_reported", c.max_n0_reported}};
  j["aux"] = {{"exact", c.aux_exact}};
  return j;
}

}  // namespace mfdyn
