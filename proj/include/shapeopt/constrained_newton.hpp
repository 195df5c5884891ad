#pragma once

#include "shapeopt/constraints.hpp"
#include "shapeopt/linear_solver.hpp"

#include <functional>
#include <vector>

namespace shapeopt {

/// Smooth energy E(u) to be made stationary subject to g(u) = 0.
struct ConstrainedProblem {
  /// Gradient of E at u and a magnitude of its summands, used to bound the
  /// attainable residual by round-off.
  std::function<std::pair<Vector, double>(const Vector&)> gradient;
  std::function<SparseMatrix(const Vector&)> hessian;
  /// Optional. When given, steps are also accepted on sufficient decrease of
  /// E + sum rho_i |g_i|, which keeps damped steps long far from the solution.
  std::function<double(const Vector&)> energy;
};

struct NewtonOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  int max_iterations = 50;
  int max_halvings = 10;
  bool use_constraints = true;
  SolverMethod solver = SolverMethod::DirectSparse;
};

struct NewtonResult {
  Vector u;
  Vector3 mu = Vector3::Zero();
  int iterations = 0;
  int linear_solves = 0;
  std::vector<double> residual_history;
};

struct SaddleStep {
  Vector du;
  Vector3 dmu = Vector3::Zero();
  int solves = 0;
};

/// Solves [A B; B^T 0] [du; dmu] = [ru; rmu] through the Schur complement
/// S = -B^T A^{-1} B (one solve per column of B plus one for ru). Rows in
/// `fixed` are eliminated with du = 0 there.
SaddleStep schur_step(const SparseMatrix& A, const Eigen::MatrixXd& B, const Vector& ru, const Vector3& rmu,
                      const std::vector<std::uint8_t>& fixed, SolverMethod solver = SolverMethod::DirectSparse);

/// Newton's method for grad E(u) + sum mu_i g_i'(u) = 0, g(u) = 0 on the
/// reference mesh of `constraints`, with u = 0 on the outer boundary. Steps
/// are halved until the residual or the merit decreases and no cell inverts. Throws
/// NonconvergenceError with the residual trace on failure.
NewtonResult constrained_newton(const ConstrainedProblem& problem, const GeometricConstraints& constraints,
                                Vector u0, Vector3 mu0, const NewtonOptions& opts);

}  // namespace shapeopt
