#include "shapeopt/descent.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/p1.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace shapeopt {

std::string descent_log_header() {
  return "method,iteration,residual,max_gradient,mu0,mu1,mu2,doublings,newton_iterations";
}

namespace {

void log_row(std::ostream* log, const char* method, int it, double residual, double maxg, const Vector3& mu,
             int doublings, int newton) {
  if (!log) return;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", method, it, residual, maxg, mu[0],
                mu[1], mu[2], doublings, newton);
  *log << buf;
}

}  // namespace

std::vector<double> update_q(const std::vector<double>& Du, const std::vector<double>& lambda, const AdmmConfig& cfg) {
  if (Du.size() != lambda.size()) throw InputError("update_q: size mismatch");
  std::vector<double> qt(Du.size()), q(Du.size());
  kernels::add(Du, lambda, qt);
  if (cfg.clip_singular_values && cfg.norm == TensorNorm::Spectral) {
    kernels::clip_singular_values(qt, q, cfg.sigma);
  } else {
    kernels::project_ball(qt, q, cfg.sigma, cfg.norm);
  }
  return q;
}

NewtonResult solve_u_subproblem(const Vector& dJ, const std::vector<double>& q, const std::vector<double>& lambda,
                                const Vector& u, const Vector3& mu, const GeometricConstraints& constraints,
                                const AdmmConfig& cfg) {
  return solve_u_subproblem(dJ, q, lambda, u, mu, constraints, cfg,
                            assemble(Kernel::P1VectorLaplacian, constraints.mesh()));
}

NewtonResult solve_u_subproblem(const Vector& dJ, const std::vector<double>& q, const std::vector<double>& lambda,
                                const Vector& u, const Vector3& mu, const GeometricConstraints& constraints,
                                const AdmmConfig& cfg, const SparseMatrix& K) {
  const TriMesh& mesh = constraints.mesh();
  const double tau = cfg.tau;
  std::vector<double> diff(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) diff[i] = q[i] - lambda[i];
  const Vector target = tau * tensor_pairing(mesh, diff);
  const SparseMatrix tauK = tau * K;

  ConstrainedProblem problem;
  problem.gradient = [&](const Vector& x) {
    const Vector Kx = tauK * x;
    return std::make_pair(Vector(dJ + Kx - target), dJ.norm() + Kx.norm() + target.norm());
  };
  problem.hessian = [&](const Vector&) { return tauK; };
  NewtonOptions opts = cfg.newton;
  opts.use_constraints = cfg.use_constraints;
  return constrained_newton(problem, constraints, u, mu, opts);
}

AdmmStatus check_convergence(double residual, double dsigma, int doublings, int iteration, const AdmmConfig& cfg,
                             int cells) {
  const double eps2 = cfg.resolved_eps2(cells);
  const double eps3 = cfg.resolved_eps3();
  if (residual < eps2) {
    if (dsigma > -eps3 && dsigma <= eps3) return AdmmStatus::Converged;
    if (dsigma > eps3 && doublings < cfg.max_doublings) return AdmmStatus::DoubleDerivative;
    if (dsigma > eps3) return AdmmStatus::Budget;  // doubling cap reached
  }
  return iteration >= cfg.max_iterations ? AdmmStatus::Budget : AdmmStatus::Continue;
}

DescentResult admm_descent(const Vector& dJ, const GeometricConstraints& constraints, const AdmmConfig& cfg) {
  if (!(cfg.sigma > 0 && cfg.sigma < 1)) throw InputError("ADMM: sigma must lie in (0, 1)");
  if (cfg.max_iterations < 1) throw InputError("ADMM: iteration budget must be positive");
  const TriMesh& mesh = constraints.mesh();
  const int nc = mesh.num_cells();
  if (dJ.size() != 2 * mesh.num_vertices()) throw InputError("ADMM: derivative size does not match the mesh");

  DescentResult res;
  res.u = Vector::Zero(dJ.size());
  if (dJ.cwiseAbs().maxCoeff() == 0.0) {
    res.converged = true;
    return res;
  }

  const SparseMatrix M = assemble(Kernel::P1VectorMass, mesh);
  const SparseMatrix K = assemble(Kernel::P1VectorLaplacian, mesh);
  const std::vector<double> areas = cell_areas(mesh);
  Vector scaled = dJ;
  std::vector<double> lambda(4 * static_cast<std::size_t>(nc), 0.0);
  std::vector<double> Du(lambda.size(), 0.0);
  std::vector<double> dlambda(lambda.size());
  Vector3 mu = Vector3::Zero();

  for (int it = 1;; ++it) {
    res.q = update_q(Du, lambda, cfg);
    const std::vector<double>& q = res.q;
    NewtonResult sub;
    try {
      sub = solve_u_subproblem(scaled, q, lambda, res.u, mu, constraints, cfg, K);
    } catch (const NonconvergenceError& e) {
      std::ostringstream msg;
      msg << "ADMM iteration " << it << ": " << e.what();
      throw NonconvergenceError(msg.str(), e.history());
    }
    res.newton_iterations += sub.iterations;
    res.linear_solves += sub.linear_solves;
    Du = p1_gradients(mesh, sub.u);
    std::copy(lambda.begin(), lambda.end(), dlambda.begin());
    kernels::multiplier_update(lambda, Du, q, cfg.tau);
    for (std::size_t i = 0; i < lambda.size(); ++i) dlambda[i] = lambda[i] - dlambda[i];
    const Vector du = sub.u - res.u;
    const double residual = kernels::weighted_squared_norm(dlambda, areas) + du.dot(M * du);
    res.u = std::move(sub.u);
    mu = sub.mu;
    res.max_gradient = kernels::max_norm(Du, cfg.norm);
    res.iterations = it;
    log_row(cfg.log, "winf", it, residual, res.max_gradient, mu, res.doublings, sub.iterations);

    const AdmmStatus status =
        check_convergence(residual, cfg.sigma - res.max_gradient, res.doublings, it, cfg, nc);
    if (status == AdmmStatus::Converged) {
      res.converged = true;
      break;
    }
    if (status == AdmmStatus::Budget) break;
    if (status == AdmmStatus::DoubleDerivative) {
      scaled *= 2.0;
      ++res.doublings;
    }
  }
  res.mu = mu;
  res.directional = dJ.dot(res.u);
  return res;
}

}  // namespace shapeopt
