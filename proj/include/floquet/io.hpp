#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "floquet/diagnostics.hpp"
#include "floquet/errors.hpp"
#include "floquet/exact_state.hpp"
#include "floquet/grid.hpp"
#include "floquet/linear_stability.hpp"
#include "floquet/params.hpp"

namespace floquet {

inline constexpr const char* kVersion = "0.1.0";

// Canonical number formatting used everywhere values are serialized, so
// repeated runs produce byte-identical artifacts and manifests round-trip
// losslessly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Flat key/value configuration with dotted keys. Two on-disk formats are
// accepted: plain "key = value" lines with '#' comments, and a flat JSON
// object (the manifest format), distinguished by a leading '{'. Values are
// kept as strings in canonical form; insertion order is irrelevant since
// the map keeps keys sorted.
class Config {
 public:
  using Map = std::map<std::string, std::string>;

  static Config defaults() {
    Config c;
    // physical parameters; V0_over_g and EF_over_g are in units of g1d*k
    c.set("g1d", 1.0);
    c.set("V0_over_g", -0.3);
    c.set("EF_over_g", 3.0);
    c.set("k", kDefaultWaveVector);
    c.set("alpha", static_cast<long>(1));
    // solver
    c.set("grid.n_points", static_cast<long>(512));
    c.set("grid.x_max", 4.0);
    c.set("solver.dt", 0.0);  // 0 = largest resonance-free step
    // noise
    c.set("noise.epsilon", 1e-3);
    c.set("noise.seed", static_cast<long>(12345));
    // evolution runs (times in drive periods)
    c.set("run.t_end_periods", 8.0);
    c.set("run.samples_per_period", static_cast<long>(50));
    c.set("run.save_snapshots", false);
    c.set("run.snapshot_format", "csv");
    c.set("run.map_periods", 2.0);
    c.set("run.theta0", 0.0);
    // ramp protocols
    c.set("ramp.direction", "down");
    c.set("ramp.periods", 7.5);  // 15*pi/omega
    c.set("ramp.hold_periods", 2.5);
    // parameter sweep (V0, EF ranges in units of g1d*k)
    c.set("sweep.v0_over_g_min", -3.0);
    c.set("sweep.v0_over_g_max", -0.1);
    c.set("sweep.ef_over_g_min", 0.1);
    c.set("sweep.ef_over_g_max", 3.0);
    c.set("sweep.n_v0", static_cast<long>(6));
    c.set("sweep.n_ef", static_cast<long>(6));
    c.set("sweep.t_end_periods", 6.0);
    c.set("sweep.n_points", static_cast<long>(256));
    c.set("sweep.threads", static_cast<long>(0));  // 0 = hardware concurrency
    // linear stability runs
    c.set("linstab.n_points", static_cast<long>(256));
    c.set("linstab.t_end_periods", 8.0);
    c.set("linstab.init", "random_smooth");
    c.set("linstab.mode_cutoff", static_cast<long>(8));
    c.set("linstab.bump_center", 0.0);
    c.set("linstab.bump_width", 0.15);
    c.set("linstab.seed", static_cast<long>(777));
    c.set("linstab.blowup_threshold", 1e6);
    c.set("linstab.mask", "auto");
    // output root; empty falls back to $FLOQUET_OUTPUT_DIR or ./floquet_out
    c.set("output.dir", "");
    return c;
  }

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
      throw ConfigParseError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path.string());
  }

  static Config from_string(const std::string& text, const std::string& origin = "<string>") {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return from_json(text, origin);
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigParseError(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + trimmed + "'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigParseError(origin + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = value;
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, const char* value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void set(const std::string& key, long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigParseError("missing config key: " + key);
    return it->second;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get_string(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigParseError("config key '" + key + "' is not a number: '" + s + "'");
    }
  }

  long get_long(const std::string& key) const {
    const std::string& s = get_string(key);
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigParseError("config key '" + key + "' is not an integer: '" + s + "'");
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get_string(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigParseError("config key '" + key + "' is not a boolean: '" + s + "'");
  }

  // Overlays the other configuration on top of this one.
  void merge(const Config& overrides) {
    for (const auto& [key, value] : overrides.values_) values_[key] = value;
  }

  // Every key must be known (from the defaults table); meta.* entries are
  // informational manifest fields and pass through.
  void validate_keys(const Config& known) const {
    for (const auto& [key, value] : values_) {
      if (key.rfind("meta.", 0) == 0) continue;
      if (!known.has(key))
        throw ConfigParseError("unknown config key: " + key);
    }
  }

  const Map& items() const { return values_; }

  std::string to_kv_string() const {
    std::string out;
    for (const auto& [key, value] : values_) {
      out += key;
      out += " = ";
      out += value;
      out += "\n";
    }
    return out;
  }

  // Flat JSON object with string values; parsing it back is lossless.
  std::string to_json_string() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : values_) j[key] = value;
    return j.dump(2) + "\n";
  }

 private:
  static Config from_json(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigParseError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object())
      throw ConfigParseError(origin + ": expected a flat JSON object");
    Config c;
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) c.values_[key] = value.get<std::string>();
      else if (value.is_boolean()) c.set(key, value.get<bool>());
      else if (value.is_number_integer()) c.set(key, static_cast<long>(value.get<long long>()));
      else if (value.is_number()) c.set(key, value.get<double>());
      else throw ConfigParseError(origin + ": key '" + key + "' has a non-scalar value");
    }
    return c;
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  Map values_;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);  // binary: stable newlines
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

// Provenance header shared by all CSV artifacts.
inline void write_params_header(std::ofstream& out, const FloquetParams& p) {
  out << "# floquet-bec v" << kVersion << " (hbar = m = 1)\n";
  out << "# g1d = " << format_double(p.g1d) << "\n";
  out << "# V0 = " << format_double(p.V0) << "\n";
  out << "# V1 = " << format_double(p.V1) << "\n";
  out << "# EF = " << format_double(p.EF) << "\n";
  out << "# k = " << format_double(p.k) << "\n";
  out << "# omega = " << format_double(p.omega) << "\n";
  out << "# alpha = " << p.alpha << "\n";
  out << "# atoms_per_well = " << format_double(p.atoms_per_well) << "\n";
  out << "# V_critical = " << format_double(p.V_critical) << "\n";
  out << "# region = " << to_string(classify_region(p)) << "\n";
}

inline std::string csv_num(double v, const char* fmt = "%.12g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace detail

// Field-map CSV over the (x, t) sampling lattice: one row per point with
// columns (x, t, re_psi, im_psi, density, theta, theta_x, flow). theta is
// empty ("nan") at zero-density nodes and theta_x carries "inf" divergence
// tags, so downstream plotting sees holes instead of garbage.
inline void write_field_map_csv(const std::filesystem::path& path,
                                const FloquetParams& p, const Grid& grid,
                                double t0, double t1, int nt,
                                PhaseOptions phase_opts = {true, true}) {
  auto out = detail::open_output(path);
  detail::write_params_header(out, p);
  out << "# phase convention: remove_floquet_term = "
      << (phase_opts.remove_floquet_term ? "true" : "false") << ", lift = "
      << (phase_opts.lift ? "true" : "false") << "\n";
  out << "x,t,re_psi,im_psi,density,theta,theta_x,flow\n";
  for (int m = 0; m <= nt; ++m) {
    const double t = t0 + (t1 - t0) * m / nt;
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const auto psi = psi_exact(x, t, p);
      const auto th = phase(x, t, p, phase_opts);
      const auto gx = phase_gradient(x, t, p);
      out << detail::csv_num(x) << ',' << detail::csv_num(t) << ','
          << detail::csv_num(psi.real()) << ',' << detail::csv_num(psi.imag()) << ','
          << detail::csv_num(density(x, t, p)) << ','
          << (th ? detail::csv_num(*th) : "nan") << ','
          << (gx.divergent ? "inf" : detail::csv_num(gx.value)) << ','
          << detail::csv_num(flow_density(x, t, p)) << "\n";
    }
  }
}

inline void write_nodes_csv(const std::filesystem::path& path, const FloquetParams& p,
                            const std::vector<VortexNode>& nodes) {
  auto out = detail::open_output(path);
  detail::write_params_header(out, p);
  out << "x,t,n,l,branch,charge\n";
  for (const auto& node : nodes) {
    out << detail::csv_num(node.x, "%.17g") << ',' << detail::csv_num(node.t, "%.17g")
        << ',' << node.n << ',' << node.l << ',' << node.branch << ',' << node.charge
        << "\n";
  }
}

// Shared trace schema across all experiment runners.
inline void write_trace_csv(const std::filesystem::path& path, const FloquetParams& p,
                            const DiagnosticsTrace& trace) {
  auto out = detail::open_output(path);
  detail::write_params_header(out, p);
  if (trace.blowup_time)
    out << "# blowup_time = " << format_double(*trace.blowup_time) << "\n";
  out << "t,fidelity,norm,mean_density,spread,max_density_dev,flag\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const bool flagged = trace.blowup_time && trace.times[i] >= *trace.blowup_time;
    out << detail::csv_num(trace.times[i], "%.17g") << ','
        << detail::csv_num(trace.fidelity[i], "%.17g") << ','
        << detail::csv_num(trace.norm[i], "%.17g") << ','
        << detail::csv_num(trace.mean_density[i], "%.17g") << ','
        << detail::csv_num(trace.spread[i], "%.17g") << ','
        << detail::csv_num(trace.max_density_dev[i], "%.17g") << ','
        << (flagged ? 1 : 0) << "\n";
  }
}

inline void write_perturbation_trace_csv(const std::filesystem::path& path,
                                         const FloquetParams& p,
                                         const PerturbationTrace& trace) {
  auto out = detail::open_output(path);
  detail::write_params_header(out, p);
  if (trace.blowup.flagged)
    out << "# blowup_time = " << format_double(trace.blowup.time) << "\n";
  out << "t,max_norm,l2_norm,masked_points,flag\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    const bool flagged = trace.blowup.flagged && trace.times[i] >= trace.blowup.time;
    out << detail::csv_num(trace.times[i], "%.17g") << ','
        << detail::csv_num(trace.max_norm[i], "%.17g") << ','
        << detail::csv_num(trace.l2_norm[i], "%.17g") << ','
        << trace.masked_points[i] << ',' << (flagged ? 1 : 0) << "\n";
  }
}

inline void write_snapshot_csv(const std::filesystem::path& path,
                               const FloquetParams& p, const WaveField& f) {
  auto out = detail::open_output(path);
  detail::write_params_header(out, p);
  out << "# t = " << format_double(f.t) << "\n";
  out << "x,re_psi,im_psi\n";
  for (int j = 0; j < f.grid.n; ++j) {
    out << detail::csv_num(f.grid.x(j), "%.17g") << ','
        << detail::csv_num(f.values[j].real(), "%.17g") << ','
        << detail::csv_num(f.values[j].imag(), "%.17g") << "\n";
  }
}

// Little-endian binary snapshot block. Header: int32 n_points, float64
// x_max, float64 t; payload: n_points interleaved (re, im) float64 pairs.
inline void write_snapshot_bin(const std::filesystem::path& path, const WaveField& f) {
  auto out = detail::open_output(path);
  const std::int32_t n = f.grid.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&f.grid.x_max), sizeof(double));
  out.write(reinterpret_cast<const char*>(&f.t), sizeof(double));
  for (int j = 0; j < f.grid.n; ++j) {
    const double re = f.values[j].real();
    const double im = f.values[j].imag();
    out.write(reinterpret_cast<const char*>(&re), sizeof(double));
    out.write(reinterpret_cast<const char*>(&im), sizeof(double));
  }
}

inline WaveField read_snapshot_bin(const std::filesystem::path& path, double lattice_k) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot: " + path.string());
  std::int32_t n = 0;
  double x_max = 0.0, t = 0.0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&x_max), sizeof(double));
  in.read(reinterpret_cast<char*>(&t), sizeof(double));
  if (!in || n < 4 || n > (1 << 24))
    throw IoError("corrupt snapshot header: " + path.string());
  WaveField f = make_field(make_grid(n, x_max, lattice_k), t);
  for (int j = 0; j < n; ++j) {
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), sizeof(double));
    in.read(reinterpret_cast<char*>(&im), sizeof(double));
    f.values[j] = {re, im};
  }
  if (!in) throw IoError("truncated snapshot payload: " + path.string());
  return f;
}

// The manifest is the effective configuration plus meta.* entries, written
// as a flat JSON object; re-ingesting it as a config reproduces the run.
inline void write_manifest(const std::filesystem::path& path, const Config& effective,
                           const std::map<std::string, std::string>& meta) {
  Config full = effective;
  for (const auto& [key, value] : meta) full.set("meta." + key, value);
  auto out = detail::open_output(path);
  out << full.to_json_string();
}

}  // namespace floquet
