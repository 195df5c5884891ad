#include "cli.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/mesh_io.hpp"
#include "shapeopt/parallel.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace shapeopt::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"mesh", {"file", "tunnel", "obstacle", "resolution", "rings", "refine"}},
      {"flow",
       {"nu", "inflow", "inflow_amplitude", "newton_rtol", "newton_atol", "newton_max_iterations", "solver"}},
      {"descent",
       {"method", "norm", "clip_singular_values", "tau", "eps2", "eps3", "max_iterations", "max_doublings",
        "use_constraints", "newton_rtol", "newton_atol", "newton_max_iterations", "max_halvings", "p_schedule",
        "eps_reg", "p_scale", "p_match_sigma", "p_newton_max_iterations", "p_max_halvings"}},
      {"run", {"steps", "sigma0", "eps1", "derivative_scale", "max_state_failures", "snapshots", "threads"}},
  };
  return keys;
}

// Locates "key" inside "[section]" of the raw text for error messages.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) {
    std::istringstream is(text);
    std::string line, section;
    for (int n = 1; std::getline(is, line); ++n) {
      const auto b = line.find_first_not_of(" \t");
      if (b == std::string::npos || line[b] == ';' || line[b] == '#') continue;
      if (line[b] == '[') {
        section = line.substr(b + 1, line.find(']') - b - 1);
        continue;
      }
      const auto eq = line.find('=');
      std::string key = line.substr(b, eq == std::string::npos ? std::string::npos : eq - b);
      key.erase(key.find_last_not_of(" \t") + 1);
      lines_.emplace(section + "." + key, n);
    }
  }
  std::string where(const std::string& origin, const std::string& section, const std::string& key) const {
    auto it = lines_.find(section + "." + key);
    std::string s = origin;
    if (it != lines_.end()) s += ":" + std::to_string(it->second);
    return s + ": [" + section + "] " + key;
  }

 private:
  std::map<std::string, int> lines_;
};

struct Reader {
  const pt::ptree& tree;
  const LineIndex& index;
  const std::string& origin;

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
    throw ConfigError(index.where(origin, section, key) + ": " + what);
  }

  const std::string* raw(const std::string& section, const std::string& key) const {
    auto sec = tree.get_child_optional(section);
    if (!sec) return nullptr;
    auto v = sec->get_child_optional(key);
    return v ? &v->data() : nullptr;
  }

  double to_double(const std::string& section, const std::string& key, const std::string& s) const {
    double v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) fail(section, key, "expected a number, got '" + s + "'");
    return v;
  }

  void number(const std::string& section, const std::string& key, double& out) const {
    if (auto s = raw(section, key)) out = to_double(section, key, *s);
  }
  void optional_number(const std::string& section, const std::string& key, std::optional<double>& out) const {
    auto s = raw(section, key);
    if (!s) return;
    if (*s == "none") {
      out.reset();
    } else {
      out = to_double(section, key, *s);
    }
  }
  void integer(const std::string& section, const std::string& key, int& out) const {
    auto s = raw(section, key);
    if (!s) return;
    int v = 0;
    const auto r = std::from_chars(s->data(), s->data() + s->size(), v);
    if (r.ec != std::errc{} || r.ptr != s->data() + s->size()) {
      fail(section, key, "expected an integer, got '" + *s + "'");
    }
    out = v;
  }
  void boolean(const std::string& section, const std::string& key, bool& out) const {
    auto s = raw(section, key);
    if (!s) return;
    if (*s == "true" || *s == "1") {
      out = true;
    } else if (*s == "false" || *s == "0") {
      out = false;
    } else {
      fail(section, key, "expected true or false, got '" + *s + "'");
    }
  }
  std::vector<double> list(const std::string& section, const std::string& key, const std::string& s) const {
    std::vector<double> v;
    std::istringstream is(s);
    for (std::string tok; is >> tok;) v.push_back(to_double(section, key, tok));
    return v;
  }
  void rect(const std::string& section, const std::string& key, Rect& out) const {
    auto s = raw(section, key);
    if (!s) return;
    const auto v = list(section, key, *s);
    if (v.size() != 4) fail(section, key, "expected four numbers: xmin xmax ymin ymax");
    out = {v[0], v[1], v[2], v[3]};
  }
  template <class E>
  void choice(const std::string& section, const std::string& key, const std::map<std::string, E>& options,
              E& out) const {
    auto s = raw(section, key);
    if (!s) return;
    auto it = options.find(*s);
    if (it == options.end()) {
      std::string names;
      for (const auto& [n, _] : options) names += (names.empty() ? "" : ", ") + n;
      fail(section, key, "unknown value '" + *s + "' (expected one of " + names + ")");
    }
    out = it->second;
  }
};

const std::map<std::string, InflowProfile> kInflow{{"cosine", InflowProfile::Cosine},
                                                   {"parabolic", InflowProfile::Parabolic}};
const std::map<std::string, SolverMethod> kSolver{{"direct", SolverMethod::DirectSparse},
                                                  {"krylov", SolverMethod::Krylov}};
const std::map<std::string, DescentMethod> kMethod{{"winf", DescentMethod::Winf}, {"plap", DescentMethod::Plap}};
const std::map<std::string, TensorNorm> kNorm{{"spectral", TensorNorm::Spectral},
                                              {"frobenius", TensorNorm::Frobenius}};

template <class E>
std::string name_of(const std::map<std::string, E>& options, E value) {
  for (const auto& [n, v] : options) {
    if (v == value) return n;
  }
  return "?";
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "none"; }

}  // namespace

Settings paper2d_preset() {
  Settings s;
  s.mesh.tunnel = {-7, 7, -3, 3};
  s.mesh.obstacle = {-0.5, 0.5, -0.5, 0.5};
  s.mesh.resolution = 128;
  s.mesh.rings = 69;
  return s;
}

Settings parse_config(std::istream& is, Settings s, const std::string& origin) {
  const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const LineIndex index(text);
  for (const auto& [section, body] : tree) {
    auto known = known_keys().find(section);
    if (known == known_keys().end()) {
      if (body.empty()) throw ConfigError(index.where(origin, "", section) + ": key outside of any section");
      throw ConfigError(origin + ": unknown section [" + section + "]");
    }
    for (const auto& [key, _] : body) {
      if (!known->second.count(key)) throw ConfigError(index.where(origin, section, key) + ": unknown key");
    }
  }
  const Reader r{tree, index, origin};

  if (auto f = r.raw("mesh", "file")) s.mesh.file = *f;
  r.rect("mesh", "tunnel", s.mesh.tunnel);
  r.rect("mesh", "obstacle", s.mesh.obstacle);
  r.integer("mesh", "resolution", s.mesh.resolution);
  r.integer("mesh", "rings", s.mesh.rings);
  r.integer("mesh", "refine", s.mesh.refine);
  if (s.mesh.refine < 0) r.fail("mesh", "refine", "must be non-negative");

  FlowConfig& flow = s.run.flow;
  r.number("flow", "nu", flow.nu);
  if (!(flow.nu > 0)) r.fail("flow", "nu", "must be positive");
  r.choice("flow", "inflow", kInflow, flow.inflow);
  r.number("flow", "inflow_amplitude", flow.inflow_amplitude);
  r.number("flow", "newton_rtol", flow.newton_rtol);
  r.number("flow", "newton_atol", flow.newton_atol);
  r.integer("flow", "newton_max_iterations", flow.newton_max_iterations);
  r.choice("flow", "solver", kSolver, flow.solver);

  AdmmConfig& admm = s.run.admm;
  PlapConfig& plap = s.run.plap;
  r.choice("descent", "method", kMethod, s.run.method);
  r.choice("descent", "norm", kNorm, admm.norm);
  r.boolean("descent", "clip_singular_values", admm.clip_singular_values);
  r.number("descent", "tau", admm.tau);
  if (!(admm.tau > 0)) r.fail("descent", "tau", "must be positive");
  r.optional_number("descent", "eps2", admm.eps2);
  r.optional_number("descent", "eps3", admm.eps3);
  r.integer("descent", "max_iterations", admm.max_iterations);
  if (admm.max_iterations < 1) r.fail("descent", "max_iterations", "must be at least 1");
  r.integer("descent", "max_doublings", admm.max_doublings);
  bool constraints = admm.use_constraints;
  r.boolean("descent", "use_constraints", constraints);
  admm.use_constraints = plap.use_constraints = constraints;
  NewtonOptions& newton = admm.newton;
  r.number("descent", "newton_rtol", newton.rtol);
  r.number("descent", "newton_atol", newton.atol);
  r.integer("descent", "newton_max_iterations", newton.max_iterations);
  r.integer("descent", "max_halvings", newton.max_halvings);
  plap.newton.rtol = newton.rtol;
  plap.newton.atol = newton.atol;
  plap.newton.solver = newton.solver;
  r.integer("descent", "p_newton_max_iterations", plap.newton.max_iterations);
  r.integer("descent", "p_max_halvings", plap.newton.max_halvings);
  if (auto p = r.raw("descent", "p_schedule")) {
    plap.schedule = r.list("descent", "p_schedule", *p);
    if (plap.schedule.empty() || plap.schedule.front() != 2.0) {
      r.fail("descent", "p_schedule", "must start at 2");
    }
    for (std::size_t i = 1; i < plap.schedule.size(); ++i) {
      if (!(plap.schedule[i] > plap.schedule[i - 1])) r.fail("descent", "p_schedule", "must be strictly increasing");
    }
  }
  r.number("descent", "eps_reg", plap.eps_reg);
  if (!(plap.eps_reg > 0)) r.fail("descent", "eps_reg", "must be positive");
  r.number("descent", "p_scale", plap.derivative_scale);
  r.boolean("descent", "p_match_sigma", s.run.plap_match_sigma);

  r.integer("run", "steps", s.run.steps);
  if (s.run.steps < 1) r.fail("run", "steps", "must be at least 1");
  r.number("run", "sigma0", s.run.sigma0);
  if (!(s.run.sigma0 > 0 && s.run.sigma0 < 1)) r.fail("run", "sigma0", "must lie in (0, 1)");
  r.optional_number("run", "eps1", s.run.eps1);
  r.number("run", "derivative_scale", s.run.derivative_scale);
  r.integer("run", "max_state_failures", s.run.max_state_failures);
  r.boolean("run", "snapshots", s.run.snapshots);
  r.integer("run", "threads", s.threads);
  if (s.threads < 1) r.fail("run", "threads", "must be at least 1");
  return s;
}

Settings load_config(const std::filesystem::path& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, std::move(base), path.string());
}

void write_config(std::ostream& os, const Settings& s) {
  auto rect = [](const Rect& r) { return num(r.x0) + " " + num(r.x1) + " " + num(r.y0) + " " + num(r.y1); };
  os << "[mesh]\n";
  if (s.mesh.file) os << "file = " << s.mesh.file->string() << "\n";
  os << "tunnel = " << rect(s.mesh.tunnel) << "\n"
     << "obstacle = " << rect(s.mesh.obstacle) << "\n"
     << "resolution = " << s.mesh.resolution << "\n"
     << "rings = " << s.mesh.rings << "\n"
     << "refine = " << s.mesh.refine << "\n\n";
  const FlowConfig& f = s.run.flow;
  os << "[flow]\n"
     << "nu = " << num(f.nu) << "\n"
     << "inflow = " << name_of(kInflow, f.inflow) << "\n"
     << "inflow_amplitude = " << num(f.inflow_amplitude) << "\n"
     << "newton_rtol = " << num(f.newton_rtol) << "\n"
     << "newton_atol = " << num(f.newton_atol) << "\n"
     << "newton_max_iterations = " << f.newton_max_iterations << "\n"
     << "solver = " << name_of(kSolver, f.solver) << "\n\n";
  const AdmmConfig& a = s.run.admm;
  const PlapConfig& p = s.run.plap;
  std::string schedule;
  for (double v : p.schedule) schedule += (schedule.empty() ? "" : " ") + num(v);
  os << "[descent]\n"
     << "method = " << name_of(kMethod, s.run.method) << "\n"
     << "norm = " << name_of(kNorm, a.norm) << "\n"
     << "clip_singular_values = " << (a.clip_singular_values ? "true" : "false") << "\n"
     << "tau = " << num(a.tau) << "\n"
     << "eps2 = " << opt_num(a.eps2) << "\n"
     << "eps3 = " << opt_num(a.eps3) << "\n"
     << "max_iterations = " << a.max_iterations << "\n"
     << "max_doublings = " << a.max_doublings << "\n"
     << "use_constraints = " << (a.use_constraints ? "true" : "false") << "\n"
     << "newton_rtol = " << num(a.newton.rtol) << "\n"
     << "newton_atol = " << num(a.newton.atol) << "\n"
     << "newton_max_iterations = " << a.newton.max_iterations << "\n"
     << "max_halvings = " << a.newton.max_halvings << "\n"
     << "p_schedule = " << schedule << "\n"
     << "eps_reg = " << num(p.eps_reg) << "\n"
     << "p_scale = " << num(p.derivative_scale) << "\n"
     << "p_match_sigma = " << (s.run.plap_match_sigma ? "true" : "false") << "\n"
     << "p_newton_max_iterations = " << p.newton.max_iterations << "\n"
     << "p_max_halvings = " << p.newton.max_halvings << "\n\n";
  os << "[run]\n"
     << "steps = " << s.run.steps << "\n"
     << "sigma0 = " << num(s.run.sigma0) << "\n"
     << "eps1 = " << opt_num(s.run.eps1) << "\n"
     << "derivative_scale = " << num(s.run.derivative_scale) << "\n"
     << "max_state_failures = " << s.run.max_state_failures << "\n"
     << "snapshots = " << (s.run.snapshots ? "true" : "false") << "\n"
     << "threads = " << s.threads << "\n";
}

TriMesh build_mesh(const MeshSettings& m) {
  TriMesh mesh = m.file ? read_mesh_file(*m.file)
                        : generate_channel_mesh(m.tunnel, m.obstacle, m.resolution, m.rings);
  for (int i = 0; i < m.refine; ++i) mesh = refine_uniform(mesh);
  return mesh;
}

Report load_report(const std::vector<std::filesystem::path>& dirs) {
  if (dirs.empty()) throw ConfigError("report: no run directories given");
  Report rep;
  for (const auto& d : dirs) {
    std::ifstream in(d / "history.csv");
    if (!in) throw ConfigError("report: no history.csv in " + d.string());
    try {
      rep.runs.push_back(read_history_csv(in));
    } catch (const InputError& e) {
      throw ConfigError("report: " + (d / "history.csv").string() + ": " + e.what());
    }
    const std::string name = d.filename().empty() ? d.parent_path().filename().string() : d.filename().string();
    rep.labels.push_back(name + ":" + to_string(rep.runs.back().method));
  }
  return rep;
}

namespace {

void write_table(std::ostream& os, const Report& rep, double StepRecord::*field) {
  os << "k";
  for (const auto& l : rep.labels) os << "," << l;
  os << "\n";
  int last = 0;
  for (const auto& h : rep.runs) last = std::max(last, h.steps.back().k);
  char buf[64];
  for (int k = 0; k <= last; ++k) {
    os << k;
    for (const auto& h : rep.runs) {
      os << ",";
      for (const auto& s : h.steps) {
        if (s.k == k) {
          std::snprintf(buf, sizeof buf, "%.6g", s.*field);
          os << buf;
          break;
        }
      }
    }
    os << "\n";
  }
}

}  // namespace

void Report::write_edge_ratio(std::ostream& os) const { write_table(os, *this, &StepRecord::edge_ratio); }
void Report::write_energy(std::ostream& os) const { write_table(os, *this, &StepRecord::J_rel); }

namespace {

Settings resolve(const std::optional<std::string>& config, bool preset) {
  Settings s = preset ? paper2d_preset() : Settings{};
  if (config) s = load_config(*config, s);
  return s;
}

TriMesh mesh_from(const Settings& s, const std::optional<std::string>& config) {
  try {
    return build_mesh(s.mesh);
  } catch (const GeometryError& e) {
    throw ConfigError((config ? *config + ": " : std::string()) + "[mesh]: " + e.what());
  } catch (const InputError& e) {
    throw ConfigError((config ? *config + ": " : std::string()) + "[mesh]: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape optimization of an obstacle in stationary channel flow"};
  app.require_subcommand(1);

  std::optional<std::string> config, out;
  bool snapshots = false;
  int refine = -1, threads = 0;
  std::vector<std::string> dirs;

  std::string preset_name;
  CLI::App* mesh_cmd = app.add_subcommand("mesh", "generate the initial mesh");
  CLI::App* run_cmd = app.add_subcommand("run", "run the optimization");
  CLI::App* report_cmd = app.add_subcommand("report", "tabulate histories of finished runs");
  for (CLI::App* sub : {mesh_cmd, run_cmd}) {
    sub->add_option("--config", config, "INI configuration file");
    sub->add_option("--preset", preset_name, "named preset")->check(CLI::IsMember({"paper2d"}));
    sub->add_option("--refine", refine, "uniform refinements of the initial mesh")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }
  mesh_cmd->add_option("--out", out, "output .mesh.txt path")->required();
  run_cmd->add_option("--out", out, "output directory")->required();
  run_cmd->add_flag("--snapshots", snapshots, "write step_NNNN.vtk files");
  report_cmd->add_option("--out", out, "directory for edge_ratio.csv and energy.csv (stdout otherwise)");
  report_cmd->add_option("runs", dirs, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const bool preset = preset_name == "paper2d";

  try {
    if (report_cmd->parsed()) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      const Report rep = load_report(paths);
      if (out) {
        std::filesystem::create_directories(*out);
        std::ofstream e(std::filesystem::path(*out) / "edge_ratio.csv");
        rep.write_edge_ratio(e);
        std::ofstream j(std::filesystem::path(*out) / "energy.csv");
        rep.write_energy(j);
      } else {
        std::cout << "# edge length ratio\n";
        rep.write_edge_ratio(std::cout);
        std::cout << "\n# J/J0\n";
        rep.write_energy(std::cout);
      }
      return 0;
    }

    Settings s = resolve(config, preset);
    if (refine >= 0) s.mesh.refine = refine;
    if (threads > 0) s.threads = threads;
    if (snapshots) s.run.snapshots = true;
    set_num_threads(s.threads);

    const TriMesh mesh = mesh_from(s, config);
    if (mesh_cmd->parsed()) {
      const std::filesystem::path path(*out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      write_mesh_file(path, mesh);
      std::string stem = path.filename().string();
      if (stem.ends_with(".mesh.txt")) stem.resize(stem.size() - 9);
      else stem = path.stem().string();
      const std::filesystem::path vtk = path.parent_path() / (stem + ".vtk");
      write_vtk_file(vtk, mesh);
      std::cout << "wrote " << path.string() << " (" << mesh.num_vertices() << " vertices, " << mesh.num_cells()
                << " cells, " << obstacle_vertices(mesh).size() << " obstacle vertices)\n";
      return 0;
    }

    const std::filesystem::path dir(*out);
    std::filesystem::create_directories(dir);
    {
      std::ofstream echo(dir / "config.ini");
      write_config(echo, s);
    }
    write_mesh_file(dir / "initial.mesh.txt", mesh);
    RunConfig run = s.run;
    run.output_dir = dir;
    run.log = &std::cerr;
    const RunResult res = optimize(mesh, run);
    write_mesh_file(dir / "final.mesh.txt", res.mesh);
    write_vtk_file(dir / "final.vtk", res.mesh, flow_fields(res.mesh, res.state));
    const StepRecord& last = res.history.steps.back();
    std::cout << "finished " << last.k << " steps, J/J0 = " << last.J_rel << ", edge ratio " << last.edge_ratio
              << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NonconvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const InversionError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace shapeopt::cli
