#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "floquet/experiments.hpp"
#include "floquet/io.hpp"
#include "floquet/params.hpp"

namespace floquet {

namespace detail {

inline int exit_code_for(const std::string& category) {
  if (category == "config-parse") return 2;
  if (category == "filesystem") return 3;
  if (category == "infeasible-parameters") return 4;
  if (category == "non-finite-field") return 5;
  return 6;
}

struct CliCommon {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::string name;
};

inline void add_common_options(CLI::App* sub, CliCommon& common) {
  sub->add_option("-c,--config", common.config_path,
                  "Config file (key = value lines, or a manifest.json)");
  sub->add_option("-s,--set", common.sets,
                  "Override a config entry, e.g. --set noise.seed=7")
      ->take_all();
  sub->add_option("-o,--out", common.out, "Output root directory");
  sub->add_option("-n,--name", common.name,
                  "Run directory name under the output root (default: subcommand)");
}

inline Config effective_config(const CliCommon& common) {
  Config cfg = Config::defaults();
  if (!common.config_path.empty()) cfg.merge(Config::from_file(common.config_path));
  for (const auto& entry : common.sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ConfigParseError("--set expects key=value, got '" + entry + "'");
    cfg.set(entry.substr(0, eq), entry.substr(eq + 1));
  }
  cfg.validate_keys(Config::defaults());
  return cfg;
}

inline std::filesystem::path resolve_out_dir(const CliCommon& common, const Config& cfg,
                                             const std::string& subcommand) {
  std::filesystem::path root;
  if (!common.out.empty()) root = common.out;
  else if (!cfg.get_string("output.dir").empty()) root = cfg.get_string("output.dir");
  else if (const char* env = std::getenv("FLOQUET_OUTPUT_DIR")) root = env;
  else root = "floquet_out";
  return root / (common.name.empty() ? subcommand : common.name);
}

}  // namespace detail

// Entry point of the command-line tool; exposed as a function so tests can
// drive the exact CLI surface in-process.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Driven-condensate Floquet toolkit: exact states, split-step "
               "evolution, linear stability and fidelity diagnostics"};
  app.require_subcommand(1);

  detail::CliCommon common;
  std::string ramp_direction;

  CLI::App* classify = app.add_subcommand(
      "classify", "Classify the balanced parameter set (phase-continuing, "
                  "boundary, phase-jumping or infeasible)");
  detail::add_common_options(classify, common);

  CLI::App* exact = app.add_subcommand(
      "exact", "Write exact-state field maps and the vortex-node sidecar");
  detail::add_common_options(exact, common);

  CLI::App* evolve_cmd = app.add_subcommand(
      "evolve", "Evolve the noise-perturbed exact state and trace fidelity");
  detail::add_common_options(evolve_cmd, common);

  CLI::App* ramp = app.add_subcommand(
      "ramp", "Slow ramp between the uniform and Floquet states");
  detail::add_common_options(ramp, common);
  ramp->add_option("-d,--direction", ramp_direction, "down (Floquet -> uniform) or up");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Region classification and fidelity probe over a (V0, EF) grid");
  detail::add_common_options(sweep, common);

  CLI::App* linstab = app.add_subcommand(
      "linstab", "Evolve a perturbation under the linearized equations");
  detail::add_common_options(linstab, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Config cfg = detail::effective_config(common);
    const std::string sub = app.get_subcommands().front()->get_name();

    if (classify->parsed()) {
      const double g1d = cfg.get_double("g1d");
      const double k = cfg.get_double("k");
      const auto params = try_make_balanced_params(
          g1d, cfg.get_double("V0_over_g") * g1d * k,
          cfg.get_double("EF_over_g") * g1d * k, k,
          static_cast<int>(cfg.get_long("alpha")));
      std::cout << (params ? to_string(classify_region(*params)) : "infeasible")
                << "\n";
      return 0;
    }

    const auto out_dir = detail::resolve_out_dir(common, cfg, sub);
    ExperimentSpec spec = ExperimentSpec::from_config(sub, cfg, out_dir);

    if (exact->parsed()) {
      const auto result = run_exact_fields(spec);
      std::cout << "fields: " << result.map_path.string() << "\n";
      std::cout << "nodes: " << result.nodes_path.string() << " ("
                << result.node_count << " in window)\n";
    } else if (evolve_cmd->parsed()) {
      const auto result = run_perturbed_evolution(spec);
      std::cout << "trace: " << result.trace_path.string() << "\n";
      std::cout << "final fidelity: " << format_double(result.final_fidelity)
                << (result.completed ? "" : " (truncated: solver failure)") << "\n";
      if (!result.completed) {
        std::fprintf(stderr, "error[non-finite-field]: evolution truncated; "
                             "see the trace flag column\n");
        return 5;
      }
    } else if (ramp->parsed()) {
      if (ramp_direction.empty()) ramp_direction = cfg.get_string("ramp.direction");
      RampDirection dir;
      if (ramp_direction == "down") dir = RampDirection::Down;
      else if (ramp_direction == "up") dir = RampDirection::Up;
      else throw ConfigParseError("ramp direction must be 'down' or 'up'");
      const auto result = run_ramp(spec, dir);
      std::cout << "trace: " << result.trace_path.string() << "\n";
      std::cout << "final fidelity: " << format_double(result.final_fidelity) << "\n";
      std::cout << "final density mean/spread: "
                << format_double(result.final_uniformity.mean) << " / "
                << format_double(result.final_uniformity.relative_spread) << "\n";
      if (!result.completed) {
        std::fprintf(stderr, "error[non-finite-field]: ramp truncated; "
                             "see the trace flag column\n");
        return 5;
      }
    } else if (sweep->parsed()) {
      const auto result = run_region_sweep(spec);
      std::cout << "sweep: " << result.csv_path.string() << " ("
                << result.cells.size() << " cells)\n";
    } else if (linstab->parsed()) {
      const auto result = run_linstab(spec);
      std::cout << "trace: " << result.trace_path.string() << "\n";
      std::cout << "blowup: " << (result.trace.blowup.flagged ? "yes" : "no") << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", e.category().c_str(), e.what());
    return detail::exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
}

}  // namespace floquet
