#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "floquet/exact_state.hpp"
#include "floquet/io.hpp"

using namespace floquet;
namespace fs = std::filesystem;

namespace {

const double k = kDefaultWaveVector;

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "floquet_io_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("key=value config parsing") {
  const Config c = Config::from_string(
      "# comment\n"
      "g1d = 1.5\n"
      "grid.n_points=256   # trailing comment\n"
      "\n"
      "run.save_snapshots = true\n");
  CHECK(c.get_double("g1d") == 1.5);
  CHECK(c.get_long("grid.n_points") == 256);
  CHECK(c.get_bool("run.save_snapshots"));

  CHECK_THROWS_AS(Config::from_string("not a key value line\n"), ConfigParseError);
  CHECK_THROWS_AS(Config::from_string("x = 1\n").get_double("missing"), ConfigParseError);
  CHECK_THROWS_AS(Config::from_string("x = abc\n").get_double("x"), ConfigParseError);
  CHECK_THROWS_AS(Config::from_string("x = 12runs\n").get_long("x"), ConfigParseError);
  CHECK_THROWS_AS(Config::from_string("x = maybe\n").get_bool("x"), ConfigParseError);
}

TEST_CASE("unknown keys are rejected against the defaults table") {
  Config cfg = Config::defaults();
  cfg.merge(Config::from_string("noise.seed = 9\n"));
  CHECK_NOTHROW(cfg.validate_keys(Config::defaults()));

  Config bad = Config::defaults();
  bad.merge(Config::from_string("noise.sedd = 9\n"));
  CHECK_THROWS_AS(bad.validate_keys(Config::defaults()), ConfigParseError);

  Config with_meta = Config::defaults();
  with_meta.set("meta.version", "x");
  CHECK_NOTHROW(with_meta.validate_keys(Config::defaults()));
}

TEST_CASE("merge applies overrides on top of defaults") {
  Config cfg = Config::defaults();
  CHECK(cfg.get_double("EF_over_g") == 3.0);
  cfg.merge(Config::from_string("EF_over_g = 0.5\n"));
  CHECK(cfg.get_double("EF_over_g") == 0.5);
  CHECK(cfg.get_double("V0_over_g") == -0.3);
}

TEST_CASE("config round trips through both on-disk formats") {
  Config cfg = Config::defaults();
  cfg.set("noise.epsilon", 3.7e-5);
  cfg.set("g1d", -1.0);

  const Config via_kv = Config::from_string(cfg.to_kv_string());
  CHECK(via_kv.items() == cfg.items());

  const Config via_json = Config::from_string(cfg.to_json_string());
  CHECK(via_json.items() == cfg.items());
}

TEST_CASE("canonical double formatting is lossless") {
  std::mt19937_64 gen(55);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 17) - 8);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("manifest re-ingests as a config") {
  const auto dir = temp_dir();
  Config cfg = Config::defaults();
  cfg.set("noise.seed", static_cast<long>(31415));
  write_manifest(dir / "manifest.json", cfg, {{"version", kVersion}, {"experiment", "t"}});

  const Config back = Config::from_file(dir / "manifest.json");
  CHECK_NOTHROW(back.validate_keys(Config::defaults()));
  CHECK(back.get_long("noise.seed") == 31415);
  CHECK(back.get_string("meta.experiment") == "t");
  for (const auto& [key, value] : cfg.items()) CHECK(back.get_string(key) == value);
}

TEST_CASE("binary snapshots round trip bit-exactly") {
  const auto dir = temp_dir();
  const FloquetParams p = make_balanced_params(1.0, -0.3 * k, 3.0 * k, k, +1);
  const Grid grid = make_grid(128, 4.0, k);
  const WaveField f = sample_exact(p, grid, 1.234);

  write_snapshot_bin(dir / "snap.bin", f);
  const WaveField g = read_snapshot_bin(dir / "snap.bin", k);
  CHECK(g.grid == f.grid);
  CHECK(g.t == f.t);
  for (int j = 0; j < grid.n; ++j) CHECK(g.values[j] == f.values[j]);

  CHECK_THROWS_AS(read_snapshot_bin(dir / "missing.bin", k), IoError);
}

TEST_CASE("csv artifacts carry the parameter header and expected columns") {
  const auto dir = temp_dir();
  const FloquetParams p = make_balanced_params(1.0, -2.0 * k, 0.5 * k, k, +1);
  const Grid grid = make_grid(64, 4.0, k);

  write_field_map_csv(dir / "map.csv", p, grid, 0.0, p.drive_period(), 10);
  const std::string map = slurp(dir / "map.csv");
  CHECK(map.find("# g1d = 1\n") != std::string::npos);
  CHECK(map.find("# region = phase-jumping\n") != std::string::npos);
  CHECK(map.find("x,t,re_psi,im_psi,density,theta,theta_x,flow\n") != std::string::npos);

  // A node at x = 0.5 lies exactly on a 32-point grid, so the sampled map
  // contains phase holes ("nan") and divergence tags ("inf") at that row.
  const FloquetParams aligned = make_balanced_params(1.0, -1.0, 0.5, k, +1);
  REQUIRE(classify_region(aligned) == Region::PhaseJumping);
  write_field_map_csv(dir / "aligned.csv", aligned, make_grid(32, 4.0, k), 0.0,
                      aligned.drive_period(), 10);
  const std::string amap = slurp(dir / "aligned.csv");
  CHECK(amap.find(",inf,") != std::string::npos);
  CHECK(amap.find(",nan,") != std::string::npos);

  DiagnosticsTrace trace;
  trace.times = {0.0, 0.5};
  trace.fidelity = {1.0, 0.7};
  trace.norm = {2.0, 2.0};
  trace.mean_density = {1.0, 1.0};
  trace.spread = {0.0, 0.1};
  trace.max_density_dev = {0.0, 0.2};
  write_trace_csv(dir / "trace.csv", p, trace);
  const std::string tr = slurp(dir / "trace.csv");
  CHECK(tr.find("t,fidelity,norm,mean_density,spread,max_density_dev,flag\n") !=
        std::string::npos);
  CHECK(tr.find("0.5,0.69999999999999996,2,1,0.10000000000000001,0.2") !=
        std::string::npos);
}
