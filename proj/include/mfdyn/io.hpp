#pragma once
// CSV series with a header row, each accompanied by a JSON sidecar.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdyn/errors.hpp"

namespace mfdyn {

// %.17g round-trips doubles and is stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> columns)
      : path_(std::move(path)), columns_(std::move(columns)), out_(path_) {
    if (!out_) throw Error("cannot write '" + path_.string() + "'");
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    require_shape(values.size() == columns_.size(), "CSV row width differs from header (" + path_.string() + ")");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
    ++rows_;
  }

  const std::filesystem::path& path() const { return path_; }
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> columns_;
  std::ofstream out_;
  std::size_t rows_ = 0;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
}

// "<name>.csv" → "<name>.csv.json"
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".json");
}

inline void write_sidecar(const CsvWriter& w, nlohmann::json meta) {
  meta["columns"] = w.columns();
  meta["rows"] = w.rows();
  meta["file"] = w.path().filename().string();
  write_json(sidecar_path(w.path()), meta);
}

}  // namespace mfdyn

namespace mfdyn {

// Orbital snapshots: "MFDYNOR1", u32 version, i32 dim, i32 sites_per_dim,
// i32 N, i32 count, then per snapshot: f64 t, L_tot·N complex (column-major).
inline constexpr char kOrbitalMagic[8] = {'M', 'F', 'D', 'Y', 'N', 'O', 'R', '1'};

template <class Snapshots>
void save_orbitals_binary(const std::filesystem::path& path, const Snapshots& snaps) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  auto put = [&](const auto& v) { f.write(reinterpret_cast<const char*>(&v), sizeof v); };
  f.write(kOrbitalMagic, 8);
  put(std::uint32_t{1});
  const auto& g = *snaps.front().grid;
  put(std::int32_t(g.dim()));
  put(std::int32_t(g.sites_per_dim()));
  put(std::int32_t(snaps.front().N()));
  put(std::int32_t(snaps.size()));
  for (const auto& s : snaps) {
    put(s.t);
    f.write(reinterpret_cast<const char*>(s.phi.data()), sizeof(s.phi(0, 0)) * s.phi.size());
  }
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace mfdyn
