#pragma once

#include "shapeopt/sparse.hpp"

#include <memory>
#include <vector>

namespace shapeopt {

enum class SolverMethod { DirectSparse, Krylov };

struct SolveStats {
  int iterations = 0;
  std::vector<double> residual_history;
};

/// Accepted residual for a linear solve: max(1e-10 |b|, 1e-12).
double residual_tolerance(const Vector& b);

/// Sparse LU (UMFPACK) held across several right-hand sides. Handles
/// nonsymmetric and symmetric-indefinite matrices; every solve is checked
/// against residual_tolerance() and polished by iterative refinement.
class DirectSolver {
 public:
  DirectSolver();
  explicit DirectSolver(const SparseMatrix& A);
  ~DirectSolver();
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;

  void factorize(const SparseMatrix& A);
  Vector solve(const Vector& b) const;
  int solves() const { return solves_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable int solves_ = 0;
};

/// Jacobi-preconditioned BiCGStab. Throws NonconvergenceError with the
/// residual history if the tolerance is not met within max_iterations.
Vector bicgstab(const SparseMatrix& A, const Vector& b, int max_iterations = 10000, SolveStats* stats = nullptr);

Vector linear_solve(const SparseMatrix& A, const Vector& b, SolverMethod method = SolverMethod::DirectSparse,
                    SolveStats* stats = nullptr);

}  // namespace shapeopt
