#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "floquet/cli.hpp"
#include "floquet/experiments.hpp"

using namespace floquet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("floquet_exp_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::vector<const char*> argv = {"floquet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  if (out) *out = captured.str();
  return rc;
}

Config small_run_config() {
  Config cfg = Config::defaults();
  cfg.set("grid.n_points", static_cast<long>(128));
  cfg.set("run.t_end_periods", 1.0);
  cfg.set("run.samples_per_period", static_cast<long>(10));
  return cfg;
}

}  // namespace

TEST_CASE("experiment specs round trip through the config format") {
  Config cfg = Config::defaults();
  cfg.set("noise.seed", static_cast<long>(777));
  const ExperimentSpec spec = ExperimentSpec::from_config("evolve", cfg, "/tmp/x");
  CHECK(spec.to_config().items() == cfg.items());
  CHECK(spec.params.EF == Catch::Approx(3.0 * kDefaultWaveVector));

  const Config reparsed = Config::from_string(spec.to_config().to_kv_string());
  const ExperimentSpec again = ExperimentSpec::from_config("evolve", reparsed, "/tmp/x");
  CHECK(again.to_config().items() == cfg.items());
}

TEST_CASE("exact-fields runs are byte-identical across repeats") {
  const auto dir_a = fresh_dir("exact_a");
  const auto dir_b = fresh_dir("exact_b");
  Config cfg = Config::defaults();
  cfg.set("grid.n_points", static_cast<long>(64));
  cfg.set("run.samples_per_period", static_cast<long>(10));
  cfg.set("V0_over_g", -2.0);
  cfg.set("EF_over_g", 0.5);

  const auto a = run_exact_fields(ExperimentSpec::from_config("exact", cfg, dir_a));
  const auto b = run_exact_fields(ExperimentSpec::from_config("exact", cfg, dir_b));
  CHECK(a.node_count > 0);
  CHECK(slurp(a.map_path) == slurp(b.map_path));
  CHECK(slurp(a.nodes_path) == slurp(b.nodes_path));
}

TEST_CASE("exact fields of the uniform-limit parameters have no nodes") {
  const auto dir = fresh_dir("exact_uniform");
  Config cfg = Config::defaults();
  cfg.set("V0_over_g", 0.0);
  cfg.set("grid.n_points", static_cast<long>(64));
  cfg.set("run.samples_per_period", static_cast<long>(5));
  const auto result = run_exact_fields(ExperimentSpec::from_config("exact", cfg, dir));
  CHECK(result.node_count == 0);
  // constant density everywhere
  const ExperimentSpec spec = ExperimentSpec::from_config("exact", cfg, dir);
  const auto stats = density_uniformity(
      sample_exact(spec.params, spec.solver_grid(), 0.77));
  CHECK(stats.relative_spread < 1e-14);
}

TEST_CASE("noise-free evolution keeps fidelity at one up to solver error") {
  const auto dir = fresh_dir("evolve_clean");
  Config cfg = small_run_config();
  cfg.set("noise.epsilon", 0.0);
  const auto result =
      run_perturbed_evolution(ExperimentSpec::from_config("evolve", cfg, dir));
  CHECK(result.completed);
  CHECK(result.min_fidelity > 1.0 - 1e-9);
}

TEST_CASE("perturbed evolution writes trace, final field and manifest") {
  const auto dir = fresh_dir("evolve");
  const auto spec = ExperimentSpec::from_config("evolve", small_run_config(), dir);
  const auto result = run_perturbed_evolution(spec);
  CHECK(result.completed);
  CHECK(result.final_fidelity > 0.999);
  CHECK(result.trace.size() == 11);
  CHECK(fs::exists(dir / "trace.csv"));
  CHECK(fs::exists(dir / "final_field.csv"));
  CHECK(fs::exists(dir / "manifest.json"));

  // the manifest is a valid config that reproduces the run byte-identically
  const auto dir2 = fresh_dir("evolve_rerun");
  Config again = Config::defaults();
  again.merge(Config::from_file(dir / "manifest.json"));
  again.set("output.dir", "");
  Config cleaned;
  for (const auto& [key, value] : again.items())
    if (key.rfind("meta.", 0) != 0) cleaned.set(key, value);
  const auto rerun = run_perturbed_evolution(
      ExperimentSpec::from_config("evolve", cleaned, dir2));
  CHECK(slurp(dir / "trace.csv") == slurp(dir2 / "trace.csv"));
  CHECK(slurp(dir / "final_field.csv") == slurp(dir2 / "final_field.csv"));
}

TEST_CASE("ramp down reaches a uniform state and a sudden quench does worse") {
  Config cfg = Config::defaults();
  cfg.set("grid.n_points", static_cast<long>(128));
  cfg.set("ramp.periods", 3.0);
  cfg.set("ramp.hold_periods", 1.0);
  cfg.set("run.samples_per_period", static_cast<long>(10));

  const auto dir = fresh_dir("ramp_down");
  const auto slow = run_ramp(ExperimentSpec::from_config("ramp", cfg, dir),
                             RampDirection::Down);
  CHECK(slow.completed);
  CHECK(slow.final_fidelity > 0.98);
  CHECK(slow.final_uniformity.mean ==
        Catch::Approx(3.15 * kDefaultWaveVector).epsilon(0.05));
  CHECK(slow.final_uniformity.relative_spread < 0.05);

  // ramp-up comparison: slow ramp versus sudden quench from the uniform state
  const auto dir_up = fresh_dir("ramp_up");
  const auto up = run_ramp(ExperimentSpec::from_config("ramp", cfg, dir_up),
                           RampDirection::Up);
  CHECK(up.completed);
  CHECK(up.final_fidelity > 0.98);

  Config quench_cfg = cfg;
  quench_cfg.set("ramp.periods", 0.0);
  quench_cfg.set("ramp.hold_periods", 4.0);
  const auto dir_q = fresh_dir("ramp_quench");
  const auto quench = run_ramp(ExperimentSpec::from_config("ramp", quench_cfg, dir_q),
                               RampDirection::Up);
  CHECK(quench.completed);
  CHECK(quench.final_fidelity < up.final_fidelity);
  CHECK(quench.final_fidelity < 0.95);
}

TEST_CASE("region sweep partitions cells and records failures in-row") {
  Config cfg = Config::defaults();
  // Include an infeasible column (V0 > 0 with g > 0).
  cfg.set("sweep.v0_over_g_min", -2.5);
  cfg.set("sweep.v0_over_g_max", 0.5);
  cfg.set("sweep.ef_over_g_min", 0.2);
  cfg.set("sweep.ef_over_g_max", 3.0);
  cfg.set("sweep.n_v0", static_cast<long>(3));
  cfg.set("sweep.n_ef", static_cast<long>(2));
  cfg.set("sweep.t_end_periods", 0.5);
  cfg.set("sweep.n_points", static_cast<long>(128));

  const auto dir = fresh_dir("sweep");
  const auto result = run_region_sweep(ExperimentSpec::from_config("sweep", cfg, dir));
  REQUIRE(result.cells.size() == 6);

  const std::set<std::string> allowed = {"phase-continuing", "boundary",
                                         "phase-jumping", "infeasible"};
  for (const auto& cell : result.cells) {
    CHECK(allowed.count(to_string(cell.region)) == 1);
    if (cell.region == Region::Infeasible) {
      CHECK(cell.status == "skipped");
    } else {
      CHECK(cell.status == "ok");
      CHECK(cell.probe_fidelity >= 0.0);
    }
  }
  const bool has_infeasible =
      std::any_of(result.cells.begin(), result.cells.end(),
                  [](const SweepCell& c) { return c.region == Region::Infeasible; });
  CHECK(has_infeasible);
  CHECK(fs::exists(result.csv_path));
}

TEST_CASE("linstab runner emits the perturbation trace schema") {
  const auto dir = fresh_dir("linstab");
  Config cfg = Config::defaults();
  cfg.set("linstab.n_points", static_cast<long>(128));
  cfg.set("linstab.t_end_periods", 1.0);
  cfg.set("linstab.mode_cutoff", static_cast<long>(4));
  const auto result = run_linstab(ExperimentSpec::from_config("linstab", cfg, dir));
  CHECK(!result.trace.blowup.flagged);
  CHECK(result.trace.times.size() > 10);
  const std::string tr = slurp(result.trace_path);
  CHECK(tr.find("t,max_norm,l2_norm,masked_points,flag\n") != std::string::npos);
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("cli classify prints the region") {
  std::string out;
  CHECK(run_cli({"classify"}, &out) == 0);
  CHECK(out == "phase-continuing\n");
  CHECK(run_cli({"classify", "-s", "V0_over_g=-2", "-s", "EF_over_g=0.5"}, &out) == 0);
  CHECK(out == "phase-jumping\n");
  CHECK(run_cli({"classify", "-s", "V0_over_g=0.4"}, &out) == 0);
  CHECK(out == "infeasible\n");
}

TEST_CASE("cli error categories and exit codes") {
  std::string out;
  CHECK(run_cli({"classify", "-c", "/does/not/exist.cfg"}, &out) == 2);
  CHECK(run_cli({"classify", "-s", "garbage"}, &out) == 2);
  CHECK(run_cli({"classify", "-s", "noise.sedd=1"}, &out) == 2);
  CHECK(run_cli({"evolve", "-s", "V0_over_g=0.4", "-o",
                 fresh_dir("cli_bad").string()},
                &out) == 4);
}

TEST_CASE("cli evolve honors config files and produces artifacts") {
  const auto dir = fresh_dir("cli_evolve");
  const auto cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "grid.n_points = 128\n"
        << "run.t_end_periods = 0.5\n"
        << "run.samples_per_period = 5\n";
  }
  std::string out;
  CHECK(run_cli({"evolve", "-c", cfg_path.string(), "-o", dir.string(), "-n", "r"},
                &out) == 0);
  CHECK(fs::exists(dir / "r" / "trace.csv"));
  CHECK(fs::exists(dir / "r" / "manifest.json"));
  CHECK(out.find("final fidelity") != std::string::npos);
}
