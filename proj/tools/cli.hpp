#pragma once

#include "shapeopt/optimizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapeopt::cli {

/// Problems with the configuration file or command line (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeshSettings {
  std::optional<std::filesystem::path> file;
  Rect tunnel{-7, 7, -3, 3};
  Rect obstacle{-0.5, 0.5, -0.5, 0.5};
  int resolution = 32;
  int rings = 0;
  int refine = 0;
};

struct Settings {
  MeshSettings mesh;
  RunConfig run;
  int threads = 1;
};

/// The 128-edge channel with the step-0 mesh of the comparison runs.
Settings paper2d_preset();

/// Overlays an INI file (sections [mesh], [flow], [descent], [run]) on
/// `base`. Unknown sections or keys and malformed values throw ConfigError
/// naming the key and its line.
Settings load_config(const std::filesystem::path& path, Settings base);
Settings parse_config(std::istream& is, Settings base, const std::string& origin = "<config>");

/// A config file that reproduces `s` exactly.
void write_config(std::ostream& os, const Settings& s);

TriMesh build_mesh(const MeshSettings& m);

/// Step-aligned tables across runs: one column per run directory.
struct Report {
  std::vector<std::string> labels;
  std::vector<RunHistory> runs;
  void write_edge_ratio(std::ostream& os) const;
  void write_energy(std::ostream& os) const;
};
Report load_report(const std::vector<std::filesystem::path>& dirs);

/// Entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace shapeopt::cli
