#include "shapeopt/descent.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/p1.hpp"
#include "shapeopt/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace shapeopt {

ConstrainedProblem plap_problem(const Vector& dJ, const TriMesh& mesh, double p, double eps_reg) {
  ConstrainedProblem problem;
  problem.gradient = [&mesh, dJ, p, eps_reg](const Vector& u) {
    const std::vector<double> Du = p1_gradients(mesh, u);
    std::vector<double> flux(Du.size());
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const double* d = Du.data() + 4 * c;
      const double s = eps_reg + d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
      const double w = std::pow(s, 0.5 * (p - 2));
      for (int i = 0; i < 4; ++i) flux[4 * c + i] = w * d[i];
    }
    const Vector inner = tensor_pairing(mesh, flux);
    return std::make_pair(Vector(dJ + inner), dJ.norm() + inner.norm());
  };
  problem.energy = [&mesh, dJ, p, eps_reg](const Vector& u) {
    const std::vector<double> Du = p1_gradients(mesh, u);
    double e = 0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const double* d = Du.data() + 4 * c;
      const double s = eps_reg + d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
      e += mesh.cell_area(c) * std::pow(s, 0.5 * p) / p;
    }
    return e + dJ.dot(u);
  };
  problem.hessian = [&mesh, p, eps_reg](const Vector& u) {
    const int nc = mesh.num_cells();
    const std::vector<double> Du = p1_gradients(mesh, u);
    using Local = Eigen::Matrix<double, 6, 6, Eigen::RowMajor>;
    std::vector<Local> locals(nc);
    parallel_for(nc, [&](int c) {
      const auto g = mesh.barycentric_gradients(c);
      const double area = mesh.cell_area(c);
      const Eigen::Map<const Eigen::Matrix<double, 2, 2, Eigen::RowMajor>> D(Du.data() + 4 * c);
      const double s = eps_reg + D.squaredNorm();
      const double w = std::pow(s, 0.5 * (p - 2));
      const double w2 = (p - 2) * std::pow(s, 0.5 * (p - 4));
      std::array<Mat2, 6> T;
      std::array<double, 6> proj;
      for (int a = 0; a < 3; ++a) {
        for (int k = 0; k < 2; ++k) {
          T[2 * a + k] = Vec2::Unit(k) * g[a].transpose();
          proj[2 * a + k] = D.row(k).dot(g[a]);  // Du : D(phi_a e_k)
        }
      }
      for (int r = 0; r < 6; ++r) {
        for (int t = 0; t < 6; ++t) {
          locals[c](r, t) = area * (w * T[r].cwiseProduct(T[t]).sum() + w2 * proj[r] * proj[t]);
        }
      }
    });
    MatrixAssembler asmb(2 * mesh.num_vertices(), 2 * mesh.num_vertices(), static_cast<std::size_t>(nc) * 36);
    std::array<int, 6> dofs;
    for (int c = 0; c < nc; ++c) {
      for (int a = 0; a < 3; ++a) {
        dofs[2 * a] = 2 * mesh.cells()[c][a];
        dofs[2 * a + 1] = dofs[2 * a] + 1;
      }
      asmb.add(dofs, dofs, locals[c]);
    }
    return asmb.finish();
  };
  return problem;
}

DescentResult plap_descent(const Vector& dJ, const GeometricConstraints& constraints, const PlapConfig& cfg,
                           TensorNorm norm) {
  if (cfg.schedule.empty() || cfg.schedule.front() != 2.0) throw InputError("p schedule must start at 2");
  for (std::size_t i = 1; i < cfg.schedule.size(); ++i) {
    if (!(cfg.schedule[i] > cfg.schedule[i - 1])) throw InputError("p schedule must be strictly increasing");
  }
  if (!(cfg.eps_reg > 0)) throw InputError("p-Laplace regularization must be positive");
  const TriMesh& mesh = constraints.mesh();
  if (dJ.size() != 2 * mesh.num_vertices()) throw InputError("p-Laplace: derivative size does not match the mesh");

  if (cfg.target_gradient && !(*cfg.target_gradient > 0)) throw InputError("p-Laplace: target gradient must be positive");

  DescentResult res;
  res.u = Vector::Zero(dJ.size());
  double scale = cfg.derivative_scale;
  NewtonOptions opts = cfg.newton;
  opts.use_constraints = cfg.use_constraints;
  Vector3 mu = Vector3::Zero();

  auto solve_at = [&](double p) {
    NewtonResult sub;
    try {
      sub = constrained_newton(plap_problem(scale * dJ, mesh, p, cfg.eps_reg), constraints, res.u, mu, opts);
    } catch (const NonconvergenceError& e) {
      std::ostringstream msg;
      msg << "p-Laplace Newton failed at p = " << p << ": " << e.what();
      throw NonconvergenceError(msg.str(), e.history());
    }
    res.u = std::move(sub.u);
    mu = sub.mu;
    res.iterations += sub.iterations;
    res.newton_iterations += sub.iterations;
    res.linear_solves += sub.linear_solves;
    if (cfg.log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "plap,%d,%.17g,%.17g,%.17g,%.17g,%.17g,0,%d\n", res.iterations,
                    sub.residual_history.back(), kernels::max_norm(p1_gradients(mesh, res.u), norm), mu[0], mu[1],
                    mu[2], sub.iterations);
      *cfg.log << buf;
    }
  };

  for (double p : cfg.schedule) {
    solve_at(p);
    if (!cfg.target_gradient) continue;
    const double m = kernels::max_norm(p1_gradients(mesh, res.u), norm);
    if (m == 0.0) continue;
    // exact for the unconstrained energy: u ~ scale^(1/(p-1))
    const double c = *cfg.target_gradient / m;
    const double cs = std::pow(c, p - 1);
    scale *= cs;
    res.u *= c;
    mu *= cs;
  }
  if (cfg.target_gradient) solve_at(cfg.schedule.back());

  res.mu = mu;
  res.converged = true;
  res.max_gradient = kernels::max_norm(p1_gradients(mesh, res.u), norm);
  res.directional = dJ.dot(res.u);
  res.derivative_scale = scale;
  return res;
}

}  // namespace shapeopt
