#pragma once

#include "shapeopt/sparse.hpp"

#include <array>

namespace shapeopt {

using Vector3 = Eigen::Vector3d;

/// Barycenter (entries 0, 1) and volume (entry 2) of the fluid domain after
/// moving the reference mesh by a P1 field u, relative to the reference:
///   g_i = int (F_i det DF - x_i),  g_3 = int (det DF - 1),  F = id + u.
/// All integrals are evaluated in closed form per cell.
class GeometricConstraints {
 public:
  explicit GeometricConstraints(TriMesh reference);

  const TriMesh& mesh() const { return mesh_; }
  double area() const { return area_; }
  /// Bounding-box diagonal of the reference mesh.
  double diameter() const { return diameter_; }
  /// Scale used for the feasibility tolerance: (|O| diam, |O| diam, |O|).
  Vector3 scale() const;

  Vector3 eval(const Vector& u) const;
  /// Columns are the derivatives of g_0, g_1, g_2, zero on the outer boundary.
  Eigen::MatrixXd gradient(const Vector& u) const;
  /// sum_i mu_i g_i'' as a sparse symmetric matrix.
  SparseMatrix hessian(const Vector& u, const Vector3& mu) const;

 private:
  TriMesh mesh_;
  std::vector<std::uint8_t> outer_;
  double area_ = 0;
  double diameter_ = 0;
};

}  // namespace shapeopt
