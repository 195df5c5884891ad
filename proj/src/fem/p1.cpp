#include "shapeopt/p1.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/parallel.hpp"

namespace shapeopt {

std::vector<double> cell_areas(const TriMesh& mesh) {
  std::vector<double> a(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](int c) { a[c] = mesh.cell_area(c); });
  return a;
}

std::vector<double> p1_gradients(const TriMesh& mesh, const Vector& u) {
  if (u.size() != 2 * mesh.num_vertices()) throw InputError("p1_gradients: field size does not match the mesh");
  std::vector<double> g(4 * static_cast<std::size_t>(mesh.num_cells()));
  parallel_for(mesh.num_cells(), [&](int c) {
    const auto grads = mesh.barycentric_gradients(c);
    Mat2 D = Mat2::Zero();
    for (int i = 0; i < 3; ++i) {
      const int v = mesh.cells()[c][i];
      D += Vec2(u[2 * v], u[2 * v + 1]) * grads[i].transpose();
    }
    double* out = g.data() + 4 * static_cast<std::size_t>(c);
    out[0] = D(0, 0);
    out[1] = D(0, 1);
    out[2] = D(1, 0);
    out[3] = D(1, 1);
  });
  return g;
}

Vector tensor_pairing(const TriMesh& mesh, const std::vector<double>& T) {
  if (T.size() != 4 * static_cast<std::size_t>(mesh.num_cells())) {
    throw InputError("tensor_pairing: field size does not match the mesh");
  }
  Vector b = Vector::Zero(2 * mesh.num_vertices());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto grads = mesh.barycentric_gradients(c);
    const double area = mesh.cell_area(c);
    const double* t = T.data() + 4 * static_cast<std::size_t>(c);
    for (int i = 0; i < 3; ++i) {
      const int v = mesh.cells()[c][i];
      b[2 * v] += area * (t[0] * grads[i].x() + t[1] * grads[i].y());
      b[2 * v + 1] += area * (t[2] * grads[i].x() + t[3] * grads[i].y());
    }
  }
  return b;
}

std::vector<std::uint8_t> outer_boundary_mask(const TriMesh& mesh) {
  std::vector<std::uint8_t> mask(2 * mesh.num_vertices(), 0);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.vertex_on_outer(v)) mask[2 * v] = mask[2 * v + 1] = 1;
  }
  return mask;
}

}  // namespace shapeopt
