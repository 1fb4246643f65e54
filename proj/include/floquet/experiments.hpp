#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "floquet/diagnostics.hpp"
#include "floquet/exact_state.hpp"
#include "floquet/io.hpp"
#include "floquet/linear_stability.hpp"
#include "floquet/params.hpp"
#include "floquet/schedule.hpp"
#include "floquet/solver.hpp"

namespace floquet {

// A fully-resolved experiment: the effective configuration plus the typed
// quantities the runners consume. Keeping the effective Config inside makes
// serialization the identity, so manifests round-trip byte-exactly.
struct ExperimentSpec {
  std::string name;
  Config config;
  FloquetParams params;
  std::filesystem::path out_dir;

  static ExperimentSpec from_config(std::string name, const Config& effective,
                                    std::filesystem::path out_dir) {
    ExperimentSpec spec;
    spec.name = std::move(name);
    spec.config = effective;
    spec.out_dir = std::move(out_dir);
    const double g1d = effective.get_double("g1d");
    const double k = effective.get_double("k");
    spec.params = make_balanced_params(
        g1d, effective.get_double("V0_over_g") * g1d * k,
        effective.get_double("EF_over_g") * g1d * k, k,
        static_cast<int>(effective.get_long("alpha")));
    return spec;
  }

  Config to_config() const { return config; }

  Grid solver_grid() const {
    return make_grid(static_cast<int>(config.get_long("grid.n_points")),
                     config.get_double("grid.x_max"), params.k);
  }

  double solver_dt(const Grid& grid) const {
    const double dt = config.get_double("solver.dt");
    return dt > 0.0 ? dt : default_dt(grid, params);
  }

  double period() const { return params.drive_period(); }
};

namespace detail {

inline std::map<std::string, std::string> base_meta(const ExperimentSpec& spec) {
  return {{"version", kVersion},
          {"experiment", spec.name},
          {"region", to_string(classify_region(spec.params))}};
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline WaveField uniform_field(const FloquetParams& p, const Grid& grid, double t,
                               double theta0 = 0.0) {
  WaveField f = make_field(grid, t);
  const auto value = std::polar(std::sqrt(density_mean(p)), theta0);
  for (auto& v : f.values) v = value;
  return f;
}

}  // namespace detail

struct ExactFieldsResult {
  std::filesystem::path map_path;
  std::filesystem::path nodes_path;
  std::size_t node_count = 0;
};

// Field maps of density, phase (Floquet factor removed) and velocity over
// two drive periods, plus the analytic node locations as a sidecar file.
inline ExactFieldsResult run_exact_fields(const ExperimentSpec& spec) {
  detail::WallClock clock;
  const Grid grid = spec.solver_grid();
  const double period = spec.period();
  const double map_periods = spec.config.get_double("run.map_periods");
  const int samples_per_period =
      static_cast<int>(spec.config.get_long("run.samples_per_period"));
  const int nt = std::max(1, static_cast<int>(map_periods * samples_per_period));

  ExactFieldsResult result;
  result.map_path = spec.out_dir / "fields.csv";
  result.nodes_path = spec.out_dir / "nodes.csv";

  write_field_map_csv(result.map_path, spec.params, grid, 0.0, map_periods * period, nt,
                      PhaseOptions{true, true});
  const int n_max = static_cast<int>(std::ceil(2.0 * map_periods));
  const auto nodes = vortex_nodes(spec.params, n_max, -grid.x_max, grid.x_max);
  result.node_count = nodes.size();
  write_nodes_csv(result.nodes_path, spec.params, nodes);

  auto meta = detail::base_meta(spec);
  meta["node_count"] = std::to_string(nodes.size());
  meta["wall_time_s"] = format_double(clock.seconds());
  write_manifest(spec.out_dir / "manifest.json", spec.config, meta);
  return result;
}

struct EvolutionResult {
  DiagnosticsTrace trace;
  double final_fidelity = std::numeric_limits<double>::quiet_NaN();
  double min_fidelity = std::numeric_limits<double>::quiet_NaN();
  bool completed = false;
  std::filesystem::path trace_path;
};

// Seeds the solver with the exact state plus white noise and follows the
// fidelity against the exact state. Solver failures truncate the trace and
// are recorded rather than rethrown.
inline EvolutionResult run_perturbed_evolution(const ExperimentSpec& spec) {
  detail::WallClock clock;
  const Grid grid = spec.solver_grid();
  const FloquetParams& p = spec.params;
  const double period = spec.period();
  const double t_end = spec.config.get_double("run.t_end_periods") * period;
  const double epsilon = spec.config.get_double("noise.epsilon");
  const auto seed = static_cast<std::uint64_t>(spec.config.get_long("noise.seed"));
  const bool save_snapshots = spec.config.get_bool("run.save_snapshots");
  const std::string snapshot_format = spec.config.get_string("run.snapshot_format");

  WaveField f = add_white_noise(sample_exact(p, grid, 0.0), epsilon, seed);

  EvolutionResult result;
  EvolveObservers obs;
  obs.sample_interval =
      period / static_cast<double>(spec.config.get_long("run.samples_per_period"));
  obs.reference = [&](double t) { return sample_exact(p, grid, t); };
  int snapshot_index = 0;
  if (save_snapshots) {
    obs.on_sample = [&](const WaveField& field) {
      char name[32];
      std::snprintf(name, sizeof(name), "snap_%05d", snapshot_index++);
      const auto base = spec.out_dir / "snapshots" / name;
      if (snapshot_format == "bin") write_snapshot_bin(base.string() + ".bin", field);
      else write_snapshot_csv(base.string() + ".csv", p, field);
    };
  }

  const RampSchedule lattice_on = RampSchedule::constant(p.V0);
  try {
    f = evolve(std::move(f), t_end, spec.solver_dt(grid), p, lattice_on, obs,
               result.trace);
    result.completed = true;
  } catch (const NonFiniteField&) {
    result.completed = false;
  }

  if (!result.trace.fidelity.empty()) {
    result.final_fidelity = result.trace.fidelity.back();
    result.min_fidelity = *std::min_element(result.trace.fidelity.begin(),
                                            result.trace.fidelity.end());
  }
  if (result.completed) {
    if (snapshot_format == "bin")
      write_snapshot_bin(spec.out_dir / "final_field.bin", f);
    else
      write_snapshot_csv(spec.out_dir / "final_field.csv", p, f);
  }

  result.trace_path = spec.out_dir / "trace.csv";
  write_trace_csv(result.trace_path, p, result.trace);
  auto meta = detail::base_meta(spec);
  meta["completed"] = result.completed ? "true" : "false";
  meta["final_fidelity"] = format_double(result.final_fidelity);
  meta["min_fidelity"] = format_double(result.min_fidelity);
  meta["wall_time_s"] = format_double(clock.seconds());
  write_manifest(spec.out_dir / "manifest.json", spec.config, meta);
  return result;
}

enum class RampDirection { Down, Up };

struct RampResult {
  DiagnosticsTrace trace;
  double final_fidelity = std::numeric_limits<double>::quiet_NaN();
  UniformityStats final_uniformity;
  bool completed = false;
  std::filesystem::path trace_path;
};

// Slow linear ramp of the potential amplitude between the Floquet state
// and the uniform state (Down: A from V0 to 0, Up: A from 0 to V0), with a
// hold at the final amplitude. Fidelity is measured against the target
// exact state: the uniform state for Down, the exact Floquet state for Up.
inline RampResult run_ramp(const ExperimentSpec& spec, RampDirection direction) {
  detail::WallClock clock;
  const Grid grid = spec.solver_grid();
  const FloquetParams& p = spec.params;
  const double period = spec.period();
  const double t_ramp = spec.config.get_double("ramp.periods") * period;
  const double t_hold = spec.config.get_double("ramp.hold_periods") * period;
  const double epsilon = spec.config.get_double("noise.epsilon");
  const auto seed = static_cast<std::uint64_t>(spec.config.get_long("noise.seed"));
  const double theta0 = spec.config.get_double("run.theta0");

  RampSchedule schedule;
  WaveField f = make_field(grid);
  EvolveObservers obs;
  obs.sample_interval =
      period / static_cast<double>(spec.config.get_long("run.samples_per_period"));
  if (direction == RampDirection::Down) {
    schedule = RampSchedule::linear(p.V0, 0.0, t_ramp);
    f = sample_exact(p, grid, 0.0);
    obs.reference = [&, grid](double t) { return detail::uniform_field(p, grid, t); };
  } else {
    schedule = RampSchedule::linear(0.0, p.V0, t_ramp);
    f = detail::uniform_field(p, grid, 0.0, theta0);
    obs.reference = [&, grid](double t) { return sample_exact(p, grid, t); };
  }
  f = add_white_noise(std::move(f), epsilon, seed);

  RampResult result;
  try {
    f = evolve(std::move(f), t_ramp + t_hold, spec.solver_dt(grid), p, schedule, obs,
               result.trace);
    result.completed = true;
    result.final_fidelity = result.trace.fidelity.back();
    result.final_uniformity = density_uniformity(f);
  } catch (const NonFiniteField&) {
    result.completed = false;
  }

  result.trace_path = spec.out_dir / "trace.csv";
  write_trace_csv(result.trace_path, p, result.trace);
  if (result.completed) write_snapshot_csv(spec.out_dir / "final_field.csv", p, f);

  auto meta = detail::base_meta(spec);
  meta["direction"] = direction == RampDirection::Down ? "down" : "up";
  meta["completed"] = result.completed ? "true" : "false";
  meta["final_fidelity"] = format_double(result.final_fidelity);
  meta["final_mean_density"] = format_double(result.final_uniformity.mean);
  meta["final_density_spread"] = format_double(result.final_uniformity.relative_spread);
  meta["wall_time_s"] = format_double(clock.seconds());
  write_manifest(spec.out_dir / "manifest.json", spec.config, meta);
  return result;
}

struct SweepCell {
  double v0_over_g = 0.0;
  double ef_over_g = 0.0;
  double v1_over_g = std::numeric_limits<double>::quiet_NaN();
  Region region = Region::Infeasible;
  double probe_fidelity = std::numeric_limits<double>::quiet_NaN();
  std::string status = "skipped";
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::filesystem::path csv_path;
};

// Classifies a (V0, EF) grid under the balance condition and probes each
// feasible cell with a short noisy evolution, recording the fidelity
// against the exact state at the probe time. Cells run concurrently and
// share nothing; rows are emitted in deterministic grid order.
inline SweepResult run_region_sweep(const ExperimentSpec& spec) {
  detail::WallClock clock;
  const Config& cfg = spec.config;
  const double g1d = cfg.get_double("g1d");
  const double k = cfg.get_double("k");
  const int alpha = static_cast<int>(cfg.get_long("alpha"));
  const double v0_min = cfg.get_double("sweep.v0_over_g_min");
  const double v0_max = cfg.get_double("sweep.v0_over_g_max");
  const double ef_min = cfg.get_double("sweep.ef_over_g_min");
  const double ef_max = cfg.get_double("sweep.ef_over_g_max");
  const int n_v0 = static_cast<int>(cfg.get_long("sweep.n_v0"));
  const int n_ef = static_cast<int>(cfg.get_long("sweep.n_ef"));
  const double periods = cfg.get_double("sweep.t_end_periods");
  const int n_points = static_cast<int>(cfg.get_long("sweep.n_points"));
  const double x_max = cfg.get_double("grid.x_max");
  const double epsilon = cfg.get_double("noise.epsilon");
  const auto seed = static_cast<std::uint64_t>(cfg.get_long("noise.seed"));

  const int total = n_v0 * n_ef;
  std::vector<SweepCell> cells(total);

  const auto run_cell = [&](int index) {
    const int i = index / n_ef;
    const int j = index % n_ef;
    SweepCell cell;
    cell.v0_over_g = (n_v0 > 1) ? v0_min + (v0_max - v0_min) * i / (n_v0 - 1) : v0_min;
    cell.ef_over_g = (n_ef > 1) ? ef_min + (ef_max - ef_min) * j / (n_ef - 1) : ef_min;
    const auto params = try_make_balanced_params(g1d, cell.v0_over_g * g1d * k,
                                                 cell.ef_over_g * g1d * k, k, alpha);
    if (!params) {
      cell.region = Region::Infeasible;
      cell.status = "skipped";
      return cell;
    }
    cell.v1_over_g = params->V1 / (g1d * k);
    cell.region = classify_region(*params);
    try {
      const Grid grid = make_grid(n_points, x_max, k);
      WaveField f = add_white_noise(sample_exact(*params, grid, 0.0), epsilon,
                                    seed + static_cast<std::uint64_t>(index));
      Stepper stepper(grid, *params, RampSchedule::constant(params->V0));
      const double dt = default_dt(grid, *params);
      const double t_end = periods * params->drive_period();
      while (f.t < t_end - 1e-12) stepper.step(f, std::min(dt, t_end - f.t));
      cell.probe_fidelity = fidelity(f, sample_exact(*params, grid, f.t));
      cell.status = "ok";
    } catch (const Error& e) {
      cell.status = std::string("error:") + e.category();
    } catch (const std::exception&) {
      cell.status = "error:internal";
    }
    return cell;
  };

  unsigned threads = static_cast<unsigned>(cfg.get_long("sweep.threads"));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.push_back(std::async(std::launch::async, [&]() {
      for (int index = next.fetch_add(1); index < total; index = next.fetch_add(1))
        cells[index] = run_cell(index);
    }));
  }
  for (auto& w : workers) w.get();

  SweepResult result;
  result.cells = std::move(cells);
  result.csv_path = spec.out_dir / "sweep.csv";
  auto out = detail::open_output(result.csv_path);
  out << "# floquet-bec v" << kVersion << " region sweep (V0, EF in units of g1d*k)\n";
  out << "v0_over_g,ef_over_g,v1_over_g,region,probe_fidelity,status\n";
  for (const auto& cell : result.cells) {
    out << detail::csv_num(cell.v0_over_g, "%.17g") << ','
        << detail::csv_num(cell.ef_over_g, "%.17g") << ','
        << detail::csv_num(cell.v1_over_g, "%.17g") << ',' << to_string(cell.region)
        << ',' << detail::csv_num(cell.probe_fidelity, "%.17g") << ',' << cell.status
        << "\n";
  }
  out.close();

  auto meta = detail::base_meta(spec);
  meta["cells"] = std::to_string(total);
  meta["wall_time_s"] = format_double(clock.seconds());
  write_manifest(spec.out_dir / "manifest.json", spec.config, meta);
  return result;
}

struct LinstabResult {
  PerturbationTrace trace;
  std::filesystem::path trace_path;
};

// Evolves a perturbation of the exact state under the linearized equations
// and reports growth and blow-up. Masking of the singular node
// neighborhoods defaults to on exactly in the phase-jumping region.
inline LinstabResult run_linstab(const ExperimentSpec& spec) {
  detail::WallClock clock;
  const Config& cfg = spec.config;
  const FloquetParams& p = spec.params;
  const Grid grid = make_grid(static_cast<int>(cfg.get_long("linstab.n_points")),
                              cfg.get_double("grid.x_max"), p.k);
  const double period = spec.period();
  const double t_end = cfg.get_double("linstab.t_end_periods") * period;

  MaskPolicy mask;
  const std::string mask_mode = cfg.get_string("linstab.mask");
  if (mask_mode == "on") mask.enabled = true;
  else if (mask_mode == "off") mask.enabled = false;
  else mask.enabled = (classify_region(p) == Region::PhaseJumping);

  StabilityOperators ops(p, grid, mask);

  PerturbationField init = make_perturbation(grid);
  const std::string kind = cfg.get_string("linstab.init");
  if (kind == "gaussian_bump") {
    init = gaussian_bump_perturbation(grid, cfg.get_double("linstab.bump_center"),
                                      cfg.get_double("linstab.bump_width"));
  } else if (kind == "random_smooth") {
    init = random_smooth_perturbation(
        grid, static_cast<int>(cfg.get_long("linstab.mode_cutoff")),
        static_cast<std::uint64_t>(cfg.get_long("linstab.seed")));
  } else {
    throw ConfigParseError("linstab.init must be random_smooth or gaussian_bump");
  }

  PerturbationRunOptions opts;
  opts.blowup_threshold = cfg.get_double("linstab.blowup_threshold");
  opts.sample_interval = period / 50.0;
  const auto out =
      evolve_perturbation(std::move(init), t_end, stable_perturbation_dt(grid), ops, opts);

  LinstabResult result;
  result.trace = out.trace;
  result.trace_path = spec.out_dir / "perturbation_trace.csv";
  write_perturbation_trace_csv(result.trace_path, p, result.trace);

  auto meta = detail::base_meta(spec);
  meta["blowup"] = result.trace.blowup.flagged ? "true" : "false";
  if (result.trace.blowup.flagged)
    meta["blowup_time"] = format_double(result.trace.blowup.time);
  meta["wall_time_s"] = format_double(clock.seconds());
  write_manifest(spec.out_dir / "manifest.json", spec.config, meta);
  return result;
}

}  // namespace floquet
