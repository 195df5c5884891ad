#include "shapeopt/constraints.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/p1.hpp"
#include "shapeopt/parallel.hpp"

#include <Eigen/Dense>

namespace shapeopt {
namespace {

Mat2 cofactor(const Mat2& A) {
  Mat2 c;
  c << A(1, 1), -A(1, 0), -A(0, 1), A(0, 0);
  return c;
}

struct CellData {
  double area;
  std::array<Vec2, 3> grads;
  Mat2 DF;
  Vec2 F;  // F = x + u at the centroid
};

CellData cell_data(const TriMesh& mesh, const Vector& u, int c) {
  CellData d;
  d.area = mesh.cell_area(c);
  d.grads = mesh.barycentric_gradients(c);
  d.DF = Mat2::Identity();
  d.F = mesh.centroid(c);
  for (int i = 0; i < 3; ++i) {
    const int v = mesh.cells()[c][i];
    const Vec2 ui(u[2 * v], u[2 * v + 1]);
    d.DF += ui * d.grads[i].transpose();
    d.F += ui / 3.0;
  }
  return d;
}

}  // namespace

GeometricConstraints::GeometricConstraints(TriMesh reference)
    : mesh_(std::move(reference)), outer_(outer_boundary_mask(mesh_)) {
  Vec2 lo = Vec2::Constant(1e300), hi = Vec2::Constant(-1e300);
  for (const auto& x : mesh_.vertices()) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  diameter_ = (hi - lo).norm();
  for (int c = 0; c < mesh_.num_cells(); ++c) area_ += mesh_.cell_area(c);
}

Vector3 GeometricConstraints::scale() const { return {area_ * diameter_, area_ * diameter_, area_}; }

Vector3 GeometricConstraints::eval(const Vector& u) const {
  if (u.size() != 2 * mesh_.num_vertices()) throw InputError("constraints: field size does not match the mesh");
  Vector3 g = Vector3::Zero();
  for (int c = 0; c < mesh_.num_cells(); ++c) {
    const CellData d = cell_data(mesh_, u, c);
    const double det = d.DF.determinant();
    const Vec2 x = mesh_.centroid(c);
    g[0] += d.area * (det * d.F.x() - x.x());
    g[1] += d.area * (det * d.F.y() - x.y());
    g[2] += d.area * (det - 1.0);
  }
  return g;
}

Eigen::MatrixXd GeometricConstraints::gradient(const Vector& u) const {
  if (u.size() != 2 * mesh_.num_vertices()) throw InputError("constraints: field size does not match the mesh");
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(u.size(), 3);
  for (int c = 0; c < mesh_.num_cells(); ++c) {
    const CellData d = cell_data(mesh_, u, c);
    const double det = d.DF.determinant();
    const Mat2 cof = cofactor(d.DF);
    for (int a = 0; a < 3; ++a) {
      const int v = mesh_.cells()[c][a];
      const Vec2 cg = cof * d.grads[a];  // (cof : D(phi_a e_k))_k
      for (int k = 0; k < 2; ++k) {
        const int dof = 2 * v + k;
        B(dof, 2) += d.area * cg[k];
        for (int i = 0; i < 2; ++i) B(dof, i) += d.area * ((i == k ? det / 3.0 : 0.0) + d.F[i] * cg[k]);
      }
    }
  }
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    if (outer_[i]) B.row(i).setZero();
  }
  return B;
}

SparseMatrix GeometricConstraints::hessian(const Vector& u, const Vector3& mu) const {
  const int nc = mesh_.num_cells();
  using Local = Eigen::Matrix<double, 6, 6, Eigen::RowMajor>;
  std::vector<Local> locals(nc);
  parallel_for(nc, [&](int c) {
    const CellData d = cell_data(mesh_, u, c);
    const Mat2 cof = cofactor(d.DF);
    // test functions phi_a e_k in local order 2a + k
    std::array<Mat2, 6> D;
    std::array<Vec2, 6> mean;
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < 2; ++k) {
        D[2 * a + k] = Vec2::Unit(k) * d.grads[a].transpose();
        mean[2 * a + k] = Vec2::Unit(k) / 3.0;
      }
    }
    Local& L = locals[c];
    for (int r = 0; r < 6; ++r) {
      const Mat2 cof_r = cofactor(D[r]);
      for (int s = 0; s < 6; ++s) {
        const double dd = cof_r.cwiseProduct(D[s]).sum();  // second derivative of det
        const double cs = cof.cwiseProduct(D[s]).sum();
        const double cr = cof.cwiseProduct(D[r]).sum();
        double val = mu[2] * dd;
        for (int i = 0; i < 2; ++i) val += mu[i] * (mean[r][i] * cs + mean[s][i] * cr + d.F[i] * dd);
        L(r, s) = d.area * val;
      }
    }
  });
  MatrixAssembler asmb(2 * mesh_.num_vertices(), 2 * mesh_.num_vertices(), static_cast<std::size_t>(nc) * 36);
  std::array<int, 6> dofs;
  for (int c = 0; c < nc; ++c) {
    for (int a = 0; a < 3; ++a) {
      dofs[2 * a] = 2 * mesh_.cells()[c][a];
      dofs[2 * a + 1] = dofs[2 * a] + 1;
    }
    asmb.add(dofs, dofs, locals[c]);
  }
  return asmb.finish();
}

}  // namespace shapeopt
