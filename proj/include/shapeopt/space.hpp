#pragma once

#include "shapeopt/mesh.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace shapeopt {

enum class SpaceKind { P0Tensor, P1Scalar, P1Vector, P2Vector };

/// Degree-of-freedom layout of a finite element space on a TriMesh.
///
/// Vector spaces interleave components: dof = 2 * node + component. P2 nodes
/// are the vertices followed by the edge midpoints; local P2 node 3 + i sits
/// on the edge joining local vertices i and (i+1)%3. P0 tensors store the 2x2
/// entries of each cell row-major.
class Space {
 public:
  SpaceKind kind() const { return kind_; }
  int num_dofs() const { return num_dofs_; }
  int dofs_per_cell() const { return dofs_per_cell_; }
  std::span<const int> cell_dofs(int cell) const {
    return {cell_dofs_.data() + static_cast<std::size_t>(cell) * dofs_per_cell_,
            static_cast<std::size_t>(dofs_per_cell_)};
  }
  bool is_dirichlet(int dof) const { return dirichlet_[dof] != 0; }
  const std::vector<std::uint8_t>& dirichlet_mask() const { return dirichlet_; }
  std::vector<int> dirichlet_dofs() const;

 private:
  friend Space build_space(const TriMesh&, SpaceKind, const std::vector<Marker>&);

  SpaceKind kind_{};
  int num_dofs_ = 0;
  int dofs_per_cell_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<std::uint8_t> dirichlet_;
};

Space build_space(const TriMesh& mesh, SpaceKind kind, const std::vector<Marker>& dirichlet = {});
/// Marker names as in the mesh file; unknown names raise InputError.
Space build_space(const TriMesh& mesh, SpaceKind kind, const std::vector<std::string>& dirichlet);

/// Marker bits per P2 node. A midpoint carries the marker of its boundary
/// edge; a vertex carries the union over its boundary edges.
std::vector<unsigned> p2_node_markers(const TriMesh& mesh);

/// Coordinates of the P2 nodes (vertices, then edge midpoints).
std::vector<Vec2> p2_node_coordinates(const TriMesh& mesh);

}  // namespace shapeopt
