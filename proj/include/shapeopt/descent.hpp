#pragma once

#include "shapeopt/constrained_newton.hpp"
#include "shapeopt/kernels.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shapeopt {

using kernels::TensorNorm;

/// Outcome of one descent-direction computation (either method).
struct DescentResult {
  Vector u;
  double directional = 0.0;  ///< <J', u> with the original J'
  int iterations = 0;        ///< ADMM iterations, or Newton iterations for p-Laplace
  int doublings = 0;
  bool converged = false;
  double max_gradient = 0.0;  ///< max over cells of |Du|
  Vector3 mu = Vector3::Zero();
  /// Last cellwise bound variable of ADMM; empty for p-Laplace.
  std::vector<double> q;
  int newton_iterations = 0;
  int linear_solves = 0;
  /// Factor actually applied to J' (p-Laplace with a target gradient).
  double derivative_scale = 1.0;
};

// ---- W^{1,inf} descent by ADMM ---------------------------------------------

struct AdmmConfig {
  double sigma = 0.3;
  double tau = 1.0;
  /// Defaults: 1e-6 * cells * sigma^2 and 0.05 * sigma.
  std::optional<double> eps2;
  std::optional<double> eps3;
  int max_iterations = 200;
  int max_doublings = 20;
  TensorNorm norm = TensorNorm::Spectral;
  /// Exact spectral projection instead of radial scaling.
  bool clip_singular_values = false;
  bool use_constraints = true;
  NewtonOptions newton;
  /// Per-iteration CSV diagnostics when set.
  std::ostream* log = nullptr;

  double resolved_eps2(int cells) const { return eps2.value_or(1e-6 * cells * sigma * sigma); }
  double resolved_eps3() const { return eps3.value_or(0.05 * sigma); }
};

enum class AdmmStatus { Continue, DoubleDerivative, Converged, Budget };

/// q = projection of (Du + lambda) onto {|q| <= sigma}, cell by cell.
std::vector<double> update_q(const std::vector<double>& Du, const std::vector<double>& lambda, const AdmmConfig& cfg);

/// Minimizes <J', u> + tau/2 |Du - q + lambda|^2 subject to g(u) = 0 by
/// constrained Newton from (u, mu).
NewtonResult solve_u_subproblem(const Vector& dJ, const std::vector<double>& q, const std::vector<double>& lambda,
                                const Vector& u, const Vector3& mu, const GeometricConstraints& constraints,
                                const AdmmConfig& cfg);
/// Same, with the vector Laplacian K already assembled on constraints.mesh().
NewtonResult solve_u_subproblem(const Vector& dJ, const std::vector<double>& q, const std::vector<double>& lambda,
                                const Vector& u, const Vector3& mu, const GeometricConstraints& constraints,
                                const AdmmConfig& cfg, const SparseMatrix& K);

/// residual = |d lambda|^2 + |d u|^2 (L2), dsigma = sigma - max|Du|.
AdmmStatus check_convergence(double residual, double dsigma, int doublings, int iteration, const AdmmConfig& cfg,
                             int cells);

/// Constrained steepest descent with |Du| <= sigma. An unconverged result
/// (iteration budget or doubling cap) is returned with converged = false.
DescentResult admm_descent(const Vector& dJ, const GeometricConstraints& constraints, const AdmmConfig& cfg);

// ---- p-Laplace relaxation ---------------------------------------------------

struct PlapConfig {
  std::vector<double> schedule{2.0, 2.5, 3.0, 3.5, 4.0, 4.4, 4.8};
  double eps_reg = 1e-10;
  double derivative_scale = 1.0;
  bool use_constraints = true;
  /// Degenerate for large p far from the solution, so damped steps are
  /// common.
  NewtonOptions newton{.max_iterations = 100, .max_halvings = 30};
  std::ostream* log = nullptr;
  /// When set, J' is rescaled after every p so that max |Du| is near this
  /// value, and p_max is solved once more with the final scale.
  std::optional<double> target_gradient;
};

/// Energy whose stationary point is the p-Laplace descent direction.
ConstrainedProblem plap_problem(const Vector& dJ, const TriMesh& mesh, double p, double eps_reg);

DescentResult plap_descent(const Vector& dJ, const GeometricConstraints& constraints, const PlapConfig& cfg,
                           TensorNorm norm = TensorNorm::Spectral);

/// Header line of the diagnostics CSV shared by both methods.
std::string descent_log_header();

}  // namespace shapeopt
