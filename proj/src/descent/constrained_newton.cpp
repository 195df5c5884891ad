#include "shapeopt/constrained_newton.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/p1.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shapeopt {
namespace {

struct Residual {
  Vector ru;
  Vector3 rmu;
  double norm;
  double scale;
};

Residual residual(const ConstrainedProblem& problem, const GeometricConstraints& constraints, const Vector& u,
                  const Vector3& mu, const std::vector<std::uint8_t>& fixed, bool use_constraints,
                  Eigen::MatrixXd* B) {
  auto [grad, scale] = problem.gradient(u);
  Residual r;
  r.ru = -grad;
  r.rmu.setZero();
  if (use_constraints) {
    *B = constraints.gradient(u);
    const Vector cg = *B * mu;
    r.ru -= cg;
    r.rmu = -constraints.eval(u);
    scale += cg.norm();
  }
  zero_constrained(r.ru, fixed);
  r.norm = std::sqrt(r.ru.squaredNorm() + r.rmu.squaredNorm());
  r.scale = scale;
  return r;
}

double min_det(const TriMesh& mesh, const Vector& u) {
  const auto d = deformation_determinants(mesh, u);
  return *std::min_element(d.begin(), d.end());
}

}  // namespace

SaddleStep schur_step(const SparseMatrix& A, const Eigen::MatrixXd& B, const Vector& ru, const Vector3& rmu,
                      const std::vector<std::uint8_t>& fixed, SolverMethod solver) {
  SparseMatrix Ad = A;
  Vector rhs = ru;
  apply_dirichlet(Ad, rhs, fixed);
  SaddleStep step;
  auto solve = [&](const Vector& b) {
    ++step.solves;
    return linear_solve(Ad, b, solver);
  };
  // Factorize once when the direct path is used.
  std::unique_ptr<DirectSolver> direct;
  if (solver == SolverMethod::DirectSparse) direct = std::make_unique<DirectSolver>(Ad);
  auto apply_inverse = [&](Vector b) {
    zero_constrained(b, fixed);
    if (direct) {
      ++step.solves;
      return direct->solve(b);
    }
    return solve(b);
  };

  const Vector z = apply_inverse(rhs);
  if (B.cols() == 0) {
    step.du = z;
    return step;
  }
  Eigen::MatrixXd Y(B.rows(), B.cols());
  for (Eigen::Index i = 0; i < B.cols(); ++i) Y.col(i) = apply_inverse(B.col(i));
  const Eigen::Matrix3d S = -B.transpose() * Y;
  step.dmu = S.fullPivLu().solve(rmu - B.transpose() * z);
  step.du = z - Y * step.dmu;
  return step;
}

NewtonResult constrained_newton(const ConstrainedProblem& problem, const GeometricConstraints& constraints,
                                Vector u0, Vector3 mu0, const NewtonOptions& opts) {
  const TriMesh& mesh = constraints.mesh();
  const auto fixed = outer_boundary_mask(mesh);
  NewtonResult out;
  out.u = std::move(u0);
  out.mu = opts.use_constraints ? mu0 : Vector3::Zero();
  zero_constrained(out.u, fixed);

  Eigen::MatrixXd B;
  Residual r = residual(problem, constraints, out.u, out.mu, fixed, opts.use_constraints, &B);
  const double r0 = r.norm;
  out.residual_history.push_back(r.norm);
  auto tolerance = [&](const Residual& res) {
    return std::max({opts.rtol * r0, opts.atol, 1e-13 * res.scale});
  };

  Vector3 rho = Vector3::Zero();
  auto merit = [&](const Vector& u) {
    double m = problem.energy(u);
    if (opts.use_constraints) m += rho.dot(constraints.eval(u).cwiseAbs());
    return m;
  };

  while (r.norm > tolerance(r)) {
    if (out.iterations == opts.max_iterations) {
      std::ostringstream msg;
      msg << "constrained Newton did not converge in " << opts.max_iterations << " iterations (residual " << r.norm
          << ")";
      throw NonconvergenceError(msg.str(), out.residual_history);
    }
    const SparseMatrix H = problem.hessian(out.u);
    const bool curvature = opts.use_constraints && out.mu.squaredNorm() > 0;
    auto newton_step = [&](bool with_curvature) {
      SaddleStep st = schur_step(with_curvature ? SparseMatrix(H + constraints.hessian(out.u, out.mu)) : H,
                                 opts.use_constraints ? B : Eigen::MatrixXd(H.rows(), 0), r.ru, r.rmu, fixed,
                                 opts.solver);
      out.linear_solves += st.solves;
      return st;
    };
    SaddleStep step = newton_step(curvature);
    ++out.iterations;

    // l1 merit; its slope along the step is grad E . du - sum rho_i |g_i|
    bool use_merit = static_cast<bool>(problem.energy);
    double phi0 = 0, slope = 0;
    auto merit_slope = [&] {
      rho = rho.cwiseMax(2.0 * (out.mu + step.dmu).cwiseAbs());
      double d = -r.ru.dot(step.du);
      if (opts.use_constraints) d -= rho.dot(r.rmu.cwiseAbs()) + out.mu.dot(B.transpose() * step.du);
      return d;
    };
    if (use_merit) {
      slope = merit_slope();
      if (slope >= 0 && curvature) {
        // the constraint curvature made the step an ascent direction; the
        // energy Hessian alone is positive definite
        step = newton_step(false);
        slope = merit_slope();
      }
      phi0 = merit(out.u);
      use_merit = slope < 0;
    }

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      Vector u = out.u + t * step.du;
      if (min_det(mesh, u) <= 0.0) continue;
      const Vector3 mu = out.mu + t * step.dmu;
      Eigen::MatrixXd Bt;
      Residual rt = residual(problem, constraints, u, mu, fixed, opts.use_constraints, &Bt);
      if (rt.norm < r.norm || rt.norm <= tolerance(rt) || (use_merit && merit(u) <= phi0 + 1e-4 * t * slope)) {
        out.u = std::move(u);
        out.mu = mu;
        r = std::move(rt);
        B = std::move(Bt);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "constrained Newton stalled at residual " << r.norm << " (target " << tolerance(r) << ")";
      throw NonconvergenceError(msg.str(), out.residual_history);
    }
    out.residual_history.push_back(r.norm);
  }
  return out;
}

}  // namespace shapeopt
