#include "shapeopt/optimizer.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/p1.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace shapeopt {

std::string to_string(DescentMethod m) { return m == DescentMethod::Winf ? "winf" : "plap"; }

DescentMethod parse_method(const std::string& s) {
  if (s == "winf") return DescentMethod::Winf;
  if (s == "plap") return DescentMethod::Plap;
  throw InputError("unknown descent method '" + s + "' (expected winf or plap)");
}

std::string RunHistory::csv_header() {
  return "method,k,J,J_rel,J_trial,directional,sigma,accepted,descent_converged,descent_iterations,doublings,"
         "newton_iterations,linear_solves,state_newton,edge_ratio,min_det,max_gradient,max_q,constraint_violation,"
         "area_drift,barycenter_drift";
}

void RunHistory::write_csv(std::ostream& os) const {
  os << csv_header() << '\n';
  char buf[1024];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf,
                  "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  to_string(method).c_str(), s.k, s.J, s.J_rel, s.J_trial, s.directional, s.sigma, s.accepted ? 1 : 0,
                  s.descent_converged ? 1 : 0, s.descent_iterations, s.doublings, s.newton_iterations,
                  s.linear_solves, s.state_newton, s.edge_ratio, s.min_det, s.max_gradient, s.max_q,
                  s.constraint_violation, s.area_drift, s.barycenter_drift);
    os << buf;
  }
}

void RunHistory::write_timing_csv(std::ostream& os) const {
  os << "k,wall_time\n";
  char buf[128];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%d,%.6f\n", s.k, s.wall_time);
    os << buf;
  }
}

RunHistory read_history_csv(std::istream& is) {
  RunHistory h;
  std::string line;
  if (!std::getline(is, line) || line != RunHistory::csv_header()) {
    throw InputError("history: missing or unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 21) throw InputError("history: malformed row '" + line + "'");
    h.method = parse_method(f[0]);
    StepRecord s;
    try {
      s.k = std::stoi(f[1]);
      s.J = std::stod(f[2]);
      s.J_rel = std::stod(f[3]);
      s.J_trial = std::strtod(f[4].c_str(), nullptr);
      s.directional = std::stod(f[5]);
      s.sigma = std::stod(f[6]);
      s.accepted = f[7] == "1";
      s.descent_converged = f[8] == "1";
      s.descent_iterations = std::stoi(f[9]);
      s.doublings = std::stoi(f[10]);
      s.newton_iterations = std::stoi(f[11]);
      s.linear_solves = std::stoi(f[12]);
      s.state_newton = std::stoi(f[13]);
      s.edge_ratio = std::stod(f[14]);
      s.min_det = std::stod(f[15]);
      s.max_gradient = std::stod(f[16]);
      s.max_q = std::stod(f[17]);
      s.constraint_violation = std::stod(f[18]);
      s.area_drift = std::stod(f[19]);
      s.barycenter_drift = std::stod(f[20]);
    } catch (const std::logic_error&) {
      throw InputError("history: malformed row '" + line + "'");
    }
    h.steps.push_back(s);
  }
  if (h.steps.empty()) throw InputError("history: no rows");
  h.J0 = h.steps.front().J;
  return h;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double bbox_diameter(const TriMesh& mesh) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& x : mesh.vertices()) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).norm();
}

// Trial state: warm start from the current state, Stokes start as fallback.
std::optional<FlowSolution> trial_state(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& guess) {
  try {
    return solve_state(mesh, cfg, &guess);
  } catch (const NonconvergenceError&) {
  } catch (const SolverError&) {
  }
  try {
    return solve_state(mesh, cfg);
  } catch (const NonconvergenceError&) {
  } catch (const SolverError&) {
  }
  return std::nullopt;
}

void write_snapshot(const std::filesystem::path& dir, int k, const TriMesh& mesh, const FlowSolution& state) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%04d.vtk", k);
  write_vtk_file(dir / name, mesh, flow_fields(mesh, state));
}

}  // namespace

RunResult optimize(const TriMesh& mesh0, const RunConfig& cfg) {
  if (cfg.steps < 1) throw InputError("run: the number of outer steps must be at least 1");
  if (!(cfg.sigma0 > 0 && cfg.sigma0 < 1)) throw InputError("run: sigma0 must lie in (0, 1)");
  validate_channel(mesh0);

  const auto run_start = Clock::now();
  RunResult out{mesh0, {}, {}};
  out.history.method = cfg.method;

  if (cfg.output_dir) std::filesystem::create_directories(*cfg.output_dir);

  const DomainMeasures initial = obstacle_measures(mesh0);
  const double diam0 = bbox_diameter(mesh0);

  out.state = solve_state(out.mesh, cfg.flow);
  double J = energy(out.mesh, cfg.flow, out.state);
  out.history.J0 = J;
  {
    StepRecord r;
    r.J = r.J_trial = J;
    r.sigma = cfg.sigma0;
    r.state_newton = out.state.newton_iterations;
    r.edge_ratio = quality_report(out.mesh).edge_length_ratio;
    r.wall_time = seconds_since(run_start);
    out.history.steps.push_back(r);
  }
  if (cfg.output_dir && cfg.snapshots) write_snapshot(*cfg.output_dir, 0, out.mesh, out.state);

  auto write_outputs = [&] {
    if (!cfg.output_dir) return;
    std::ofstream h(*cfg.output_dir / "history.csv");
    out.history.write_csv(h);
    std::ofstream t(*cfg.output_dir / "timing.csv");
    out.history.write_timing_csv(t);
    if (!h || !t) throw std::runtime_error("could not write history to " + cfg.output_dir->string());
  };

  double sigma = cfg.sigma0;
  int failures = 0;
  try {
  for (int k = 1; k <= cfg.steps; ++k) {
    const auto step_start = Clock::now();
    StepRecord r;
    r.k = k;
    r.sigma = sigma;

    DescentResult d;
    try {
      const FlowSolution adjoint = solve_adjoint(out.mesh, cfg.flow, out.state);
      const ShapeGradient dJ = shape_derivative(out.mesh, cfg.flow, out.state, adjoint);
      // constraints measured from the current geometry
      const GeometricConstraints constraints(out.mesh);
      if (cfg.method == DescentMethod::Winf) {
        AdmmConfig admm = cfg.admm;
        admm.sigma = sigma;
        d = admm_descent(cfg.derivative_scale * dJ.dual, constraints, admm);
      } else {
        PlapConfig plap = cfg.plap;
        plap.derivative_scale = cfg.plap.derivative_scale * cfg.derivative_scale;
        if (!cfg.plap_match_sigma) plap.derivative_scale *= sigma / cfg.sigma0;
        if (cfg.plap_match_sigma) plap.target_gradient = sigma;
        d = plap_descent(dJ.dual, constraints, plap, cfg.admm.norm);
      }
      if (cfg.negate_direction) d.u = -d.u;
      d.directional = dJ.dual.dot(d.u);
      const Vector3 g = constraints.eval(d.u).cwiseQuotient(constraints.scale());
      r.constraint_violation = g.cwiseAbs().maxCoeff();
    } catch (const NonconvergenceError& e) {
      std::ostringstream msg;
      msg << "outer step " << k << ": descent failed: " << e.what();
      throw NonconvergenceError(msg.str(), e.history());
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "outer step " << k << ": descent failed: " << e.what();
      throw NonconvergenceError(msg.str(), {});
    }
    r.directional = d.directional;
    r.descent_converged = d.converged;
    r.descent_iterations = d.iterations;
    r.doublings = d.doublings;
    r.newton_iterations = d.newton_iterations;
    r.linear_solves = d.linear_solves;
    r.max_gradient = d.max_gradient;
    if (!d.q.empty()) r.max_q = kernels::max_norm(d.q, cfg.admm.norm);

    const auto dets = deformation_determinants(out.mesh, d.u);
    r.min_det = *std::min_element(dets.begin(), dets.end());

    std::optional<TriMesh> trial_mesh;
    std::optional<FlowSolution> trial;
    if (r.min_det > 0.0) {
      trial_mesh = apply_deformation(out.mesh, d.u);
      trial = trial_state(*trial_mesh, cfg.flow, out.state);
    }
    r.J_trial = std::numeric_limits<double>::quiet_NaN();
    if (trial) {
      failures = 0;
      r.J_trial = energy(*trial_mesh, cfg.flow, *trial);
      r.state_newton = trial->newton_iterations;
      r.accepted = r.J_trial < J;
    } else {
      r.accepted = false;
      if (++failures >= cfg.max_state_failures) {
        std::ostringstream msg;
        msg << "outer step " << k << ": state solve failed on " << failures << " consecutive trial geometries";
        throw NonconvergenceError(msg.str(), {});
      }
    }

    if (r.accepted) {
      out.mesh = std::move(*trial_mesh);
      out.state = std::move(*trial);
      J = r.J_trial;
    } else {
      sigma *= 0.5;
    }
    r.J = J;
    r.J_rel = J / out.history.J0;
    r.edge_ratio = quality_report(out.mesh).edge_length_ratio;
    const DomainMeasures now = obstacle_measures(out.mesh);
    r.area_drift = std::abs(now.area - initial.area) / initial.area;
    r.barycenter_drift = (now.barycenter - initial.barycenter).norm() / diam0;
    r.wall_time = seconds_since(step_start);
    out.history.steps.push_back(r);

    if (cfg.log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "[%s] step %d J/J0 = %.6f sigma = %.4g %s ratio = %.3f (%.1f s)\n",
                    to_string(cfg.method).c_str(), k, r.J_rel, r.sigma, r.accepted ? "accepted" : "rejected",
                    r.edge_ratio, r.wall_time);
      *cfg.log << buf << std::flush;
    }
    if (cfg.output_dir && cfg.snapshots && r.accepted) write_snapshot(*cfg.output_dir, k, out.mesh, out.state);
    if (cfg.eps1 && std::abs(r.directional) < r.sigma * *cfg.eps1) break;
  }
  } catch (...) {
    // keep what was computed so far
    write_outputs();
    throw;
  }
  write_outputs();
  return out;
}

}  // namespace shapeopt
