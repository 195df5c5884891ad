#include "shapeopt/linear_solver.hpp"

#include "shapeopt/errors.hpp"

#include <Eigen/UmfPackSupport>

#include <cmath>
#include <string>

namespace shapeopt {

double residual_tolerance(const Vector& b) { return std::max(1e-10 * b.norm(), 1e-12); }

struct DirectSolver::Impl {
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> A;
  Eigen::UmfPackLU<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> lu;
};

DirectSolver::DirectSolver() : impl_(std::make_unique<Impl>()) {
  // refinement is done below against our own tolerance
  impl_->lu.umfpackControl()(UMFPACK_IRSTEP) = 0;
}
DirectSolver::DirectSolver(const SparseMatrix& A) : DirectSolver() { factorize(A); }
DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

namespace {

std::string pivot_report(const SparseMatrix& A) {
  for (int row = 0; row < A.outerSize(); ++row) {
    bool empty = true;
    for (SparseMatrix::InnerIterator it(A, row); it; ++it) empty = empty && it.value() == 0.0;
    if (empty) return "row " + std::to_string(row) + " is zero";
  }
  return "no zero row; numerically rank deficient";
}

}  // namespace

void DirectSolver::factorize(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw InputError("direct solve needs a square matrix");
  impl_->A = A;
  impl_->A.makeCompressed();
  impl_->lu.compute(impl_->A);
  if (impl_->lu.info() != Eigen::Success) {
    throw SolverError("sparse LU failed (UMFPACK status " + std::to_string(impl_->lu.umfpackFactorizeReturncode()) +
                      "): " + pivot_report(A));
  }
}

Vector DirectSolver::solve(const Vector& b) const {
  if (b.size() != impl_->A.rows()) throw InputError("right-hand side size mismatch");
  ++solves_;
  Vector x = impl_->lu.solve(b);
  const double tol = residual_tolerance(b);
  Vector r = b - impl_->A * x;
  double res = r.norm();
  for (int refine = 0; refine < 3 && res > tol; ++refine) {
    x += impl_->lu.solve(r);
    r = b - impl_->A * x;
    res = r.norm();
  }
  if (!std::isfinite(res) || res > tol) {
    throw SolverError("direct solve residual " + std::to_string(res) + " exceeds " + std::to_string(tol));
  }
  return x;
}

Vector bicgstab(const SparseMatrix& A, const Vector& b, int max_iterations, SolveStats* stats) {
  const Eigen::Index n = b.size();
  Vector inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = A.coeff(i, i);
    inv_diag[i] = d != 0.0 ? 1.0 / d : 1.0;
  }
  const double tol = residual_tolerance(b);
  std::vector<double> history;
  Vector x = Vector::Zero(n);
  Vector r = b;
  double res = r.norm();
  history.push_back(res);
  if (res <= tol) {
    if (stats) *stats = {0, history};
    return x;
  }
  const Vector r_hat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  Vector v = Vector::Zero(n), p = Vector::Zero(n);
  for (int it = 1; it <= max_iterations; ++it) {
    const double rho_new = r_hat.dot(r);
    if (rho_new == 0.0) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    p = r + beta * (p - omega * v);
    const Vector p_hat = inv_diag.cwiseProduct(p);
    v = A * p_hat;
    alpha = rho / r_hat.dot(v);
    const Vector s = r - alpha * v;
    const Vector s_hat = inv_diag.cwiseProduct(s);
    const Vector t = A * s_hat;
    const double tt = t.squaredNorm();
    omega = tt > 0.0 ? t.dot(s) / tt : 0.0;
    x += alpha * p_hat + omega * s_hat;
    r = s - omega * t;
    res = r.norm();
    history.push_back(res);
    if (res <= tol) {
      // recompute the true residual to guard against drift of the recursion
      res = (b - A * x).norm();
      if (res <= tol) {
        if (stats) *stats = {it, history};
        return x;
      }
      r = b - A * x;
    }
    if (omega == 0.0) break;
  }
  throw NonconvergenceError("BiCGStab stagnated at residual " + std::to_string(res), std::move(history));
}

Vector linear_solve(const SparseMatrix& A, const Vector& b, SolverMethod method, SolveStats* stats) {
  if (method == SolverMethod::Krylov) return bicgstab(A, b, 10000, stats);
  DirectSolver solver(A);
  Vector x = solver.solve(b);
  if (stats) *stats = {1, {(b - A * x).norm()}};
  return x;
}

}  // namespace shapeopt
