#include "doctest.h"

#include "cli.hpp"
#include "shapeopt/mesh_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shapeopt;
using namespace shapeopt::cli;

namespace {

Settings parse(const std::string& text, Settings base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base), "test.ini");
}

std::string echo(const Settings& s) {
  std::ostringstream os;
  write_config(os, s);
  return os.str();
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_main(std::vector<std::string> args) {
  args.insert(args.begin(), "shapeopt");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("shapeopt_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("values are read into the settings") {
  const Settings s = parse(
      "[mesh]\nresolution = 16\ntunnel = -4 4 -2 2\n"
      "[flow]\nnu = 0.02\ninflow = parabolic\n"
      "[descent]\nmethod = plap\np_schedule = 2 3 4\nuse_constraints = false\neps3 = 0.01\n"
      "[run]\nsteps = 7\nsigma0 = 0.25\neps1 = 1e-3\n");
  CHECK(s.mesh.resolution == 16);
  CHECK(s.mesh.tunnel.x0 == -4.0);
  CHECK(s.mesh.tunnel.y1 == 2.0);
  CHECK(s.run.flow.nu == 0.02);
  CHECK(s.run.flow.inflow == InflowProfile::Parabolic);
  CHECK(s.run.method == DescentMethod::Plap);
  CHECK(s.run.plap.schedule == std::vector<double>{2, 3, 4});
  CHECK_FALSE(s.run.admm.use_constraints);
  CHECK_FALSE(s.run.plap.use_constraints);
  CHECK(s.run.admm.eps3 == 0.01);
  CHECK(s.run.steps == 7);
  CHECK(s.run.sigma0 == 0.25);
  CHECK(s.run.eps1 == 1e-3);

  const Settings unset = parse("[run]\neps1 = none\n", s);
  CHECK_FALSE(unset.run.eps1.has_value());
  CHECK(unset.run.steps == 7);
}

TEST_CASE("the echoed configuration reproduces the settings") {
  Settings s = paper2d_preset();
  s.run.eps1 = 0.1 + 0.2;
  s.run.plap.schedule = {2, 2.5, 3.75};
  s.run.admm.norm = TensorNorm::Frobenius;
  s.threads = 3;
  const std::string first = echo(s);
  CHECK(echo(parse(first)) == first);
  CHECK(echo(parse(echo(Settings{}))) == echo(Settings{}));
}

TEST_CASE("problems are reported with their location") {
  CHECK(config_error("[run]\nsteps = 3\nstpes = 4\n").find("test.ini:3: [run] stpes: unknown key") == 0);
  CHECK(config_error("[solver]\nx = 1\n").find("unknown section [solver]") != std::string::npos);
  CHECK(config_error("[mesh]\nresolution = 12x\n").find("test.ini:2") != std::string::npos);
  CHECK(config_error("[mesh]\nresolution = 1e99\n").find("test.ini:2") != std::string::npos);
  CHECK_FALSE(config_error("[flow]\nnu = -1\n").empty());
  CHECK_FALSE(config_error("[flow]\ninflow = plug\n").empty());
  CHECK_FALSE(config_error("[descent]\np_schedule = 3 4\n").empty());
  CHECK_FALSE(config_error("[descent]\np_schedule = 2 4 3\n").empty());
  CHECK_FALSE(config_error("[descent]\nuse_constraints = maybe\n").empty());
  CHECK_FALSE(config_error("[run]\nsigma0 = 1\n").empty());
  CHECK_FALSE(config_error("[run]\nsteps = 0\n").empty());
  CHECK_FALSE(config_error("[run\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini", {}), ConfigError);
}

TEST_CASE("preset mesh") {
  const Settings s = paper2d_preset();
  CHECK(build_mesh(s.mesh).num_cells() == 17664);
}

TEST_CASE("mesh, run and report subcommands") {
  const auto dir = scratch("commands");
  {
    std::ofstream cfg(dir / "small.ini");
    cfg << "[mesh]\ntunnel = -3 3 -1.5 1.5\nresolution = 8\n[run]\nsteps = 1\n";
  }
  const std::string cfg = (dir / "small.ini").string();

  CHECK(run_main({"mesh", "--config", cfg, "--out", (dir / "m.mesh.txt").string()}) == 0);
  CHECK(std::filesystem::exists(dir / "m.vtk"));
  const TriMesh m = read_mesh_file(dir / "m.mesh.txt");
  CHECK(m.num_cells() == build_mesh(parse("[mesh]\ntunnel = -3 3 -1.5 1.5\nresolution = 8\n").mesh).num_cells());

  CHECK(run_main({"run", "--config", cfg, "--out", (dir / "a").string()}) == 0);
  for (const char* f : {"config.ini", "initial.mesh.txt", "history.csv", "timing.csv", "final.mesh.txt", "final.vtk"}) {
    CHECK(std::filesystem::exists(dir / "a" / f));
  }
  // the echoed config alone reproduces the run
  CHECK(run_main({"run", "--config", (dir / "a" / "config.ini").string(), "--out", (dir / "b").string()}) == 0);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "a" / "history.csv") == slurp(dir / "b" / "history.csv"));

  CHECK(run_main({"report", (dir / "a").string(), (dir / "b").string(), "--out", (dir / "rep").string()}) == 0);
  const std::string energy = slurp(dir / "rep" / "energy.csv");
  CHECK(energy.rfind("k,a:winf,b:winf\n0,1,1\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "rep" / "edge_ratio.csv"));

  const auto load = load_report({dir / "a"});
  CHECK(load.runs.size() == 1);
  CHECK_THROWS_AS(load_report({}), ConfigError);
  CHECK_THROWS_AS(load_report({dir / "rep"}), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  {
    std::ofstream bad(dir / "bad.ini");
    bad << "[mesh]\nresolution = 3\n";
    std::ofstream unknown(dir / "unknown.ini");
    unknown << "[run]\nspeed = 1\n";
  }
  CHECK(run_main({"mesh", "--config", (dir / "bad.ini").string(), "--out", (dir / "x.mesh.txt").string()}) == 2);
  CHECK(run_main({"run", "--config", (dir / "unknown.ini").string(), "--out", (dir / "r").string()}) == 2);
  CHECK(run_main({"report", (dir / "missing").string()}) == 2);
  CHECK(run_main({"frobnicate"}) == 2);
  CHECK(run_main({"mesh", "--preset", "channel3d", "--out", "x"}) == 2);
  std::filesystem::remove_all(dir);
}
