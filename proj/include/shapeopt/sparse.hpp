#pragma once

#include "shapeopt/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace shapeopt {

/// Compressed sparse rows, sorted column indices.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

/// Collects element contributions in call order; duplicate entries are summed
/// in that same order, so a fixed cell ordering gives bitwise-reproducible
/// matrices.
class MatrixAssembler {
 public:
  MatrixAssembler(int rows, int cols, std::size_t reserve = 0);

  void add(std::span<const int> rows, std::span<const int> cols, const Eigen::Ref<const Eigen::MatrixXd>& local);
  void add(int row, int col, double value) { triplets_.emplace_back(row, col, value); }

  /// Builds the matrix and drops entries that are exactly zero.
  SparseMatrix finish();

 private:
  int rows_, cols_;
  std::vector<Eigen::Triplet<double, int>> triplets_;
};

/// Symmetric Dirichlet elimination: values move to the right-hand side, the
/// constrained rows and columns are replaced by the identity.
void apply_dirichlet(SparseMatrix& A, Vector& b, const std::vector<std::uint8_t>& constrained, const Vector& values);
/// Homogeneous variant for Newton updates.
void apply_dirichlet(SparseMatrix& A, Vector& b, const std::vector<std::uint8_t>& constrained);
/// Zeroes constrained entries of a vector.
void zero_constrained(Vector& v, const std::vector<std::uint8_t>& constrained);

/// Field-independent P1 kernels.
enum class Kernel {
  P1Mass,             ///< scalar mass matrix
  P1Stiffness,        ///< scalar Laplacian
  P1VectorMass,       ///< mass on interleaved 2-vectors
  P1VectorLaplacian,  ///< int Du : Dv on interleaved 2-vectors
};

SparseMatrix assemble(Kernel kernel, const TriMesh& mesh);

/// Coordinate text dump "row col value" (1-based) with a size header.
void write_matrix_market(std::ostream& os, const SparseMatrix& A);

}  // namespace shapeopt
