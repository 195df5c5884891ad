#pragma once

#include "shapeopt/sparse.hpp"

#include <vector>

// Helpers for piecewise linear vector fields (interleaved, 2 per vertex) and
// their cellwise constant gradients (4 per cell, row-major, (Du)_kj = d_j u_k).
namespace shapeopt {

std::vector<double> cell_areas(const TriMesh& mesh);

std::vector<double> p1_gradients(const TriMesh& mesh, const Vector& u);

/// b[2a+k] = int T : D(phi_a e_k) for a cellwise constant tensor field T.
Vector tensor_pairing(const TriMesh& mesh, const std::vector<double>& T);

/// Mask of interleaved P1 vector dofs on the outer boundary (inflow, outflow,
/// wall). Deformation fields vanish there.
std::vector<std::uint8_t> outer_boundary_mask(const TriMesh& mesh);

}  // namespace shapeopt
