#include "shapeopt/space.hpp"

#include "shapeopt/errors.hpp"

#include <algorithm>

namespace shapeopt {

std::vector<int> Space::dirichlet_dofs() const {
  std::vector<int> out;
  for (int i = 0; i < num_dofs_; ++i) {
    if (dirichlet_[i]) out.push_back(i);
  }
  return out;
}

Space build_space(const TriMesh& mesh, SpaceKind kind, const std::vector<Marker>& dirichlet) {
  Space s;
  s.kind_ = kind;
  const int nv = mesh.num_vertices();
  const int nc = mesh.num_cells();
  unsigned mask = 0;
  for (Marker m : dirichlet) mask |= marker_bit(m);

  switch (kind) {
    case SpaceKind::P0Tensor:
      s.num_dofs_ = 4 * nc;
      s.dofs_per_cell_ = 4;
      s.cell_dofs_.resize(4 * static_cast<std::size_t>(nc));
      for (int i = 0; i < 4 * nc; ++i) s.cell_dofs_[i] = i;
      s.dirichlet_.assign(s.num_dofs_, 0);
      return s;
    case SpaceKind::P1Scalar:
    case SpaceKind::P1Vector: {
      const int comps = kind == SpaceKind::P1Scalar ? 1 : 2;
      s.num_dofs_ = comps * nv;
      s.dofs_per_cell_ = 3 * comps;
      s.cell_dofs_.reserve(static_cast<std::size_t>(nc) * s.dofs_per_cell_);
      for (const auto& cell : mesh.cells()) {
        for (int v : cell) {
          for (int k = 0; k < comps; ++k) s.cell_dofs_.push_back(comps * v + k);
        }
      }
      s.dirichlet_.assign(s.num_dofs_, 0);
      for (const auto& be : mesh.boundary_edges()) {
        if (!(mask & marker_bit(be.marker))) continue;
        for (int v : {be.v0, be.v1}) {
          for (int k = 0; k < comps; ++k) s.dirichlet_[comps * v + k] = 1;
        }
      }
      return s;
    }
    case SpaceKind::P2Vector: {
      s.num_dofs_ = 2 * (nv + mesh.num_edges());
      s.dofs_per_cell_ = 12;
      s.cell_dofs_.reserve(static_cast<std::size_t>(nc) * 12);
      for (int c = 0; c < nc; ++c) {
        const auto& cell = mesh.cells()[c];
        const auto& ce = mesh.cell_edges()[c];
        const int nodes[6] = {cell[0], cell[1], cell[2], nv + ce[0], nv + ce[1], nv + ce[2]};
        for (int node : nodes) {
          s.cell_dofs_.push_back(2 * node);
          s.cell_dofs_.push_back(2 * node + 1);
        }
      }
      s.dirichlet_.assign(s.num_dofs_, 0);
      if (mask == 0) return s;
      const auto markers = p2_node_markers(mesh);
      for (std::size_t n = 0; n < markers.size(); ++n) {
        if (markers[n] & mask) s.dirichlet_[2 * n] = s.dirichlet_[2 * n + 1] = 1;
      }
      return s;
    }
  }
  throw InputError("unknown space kind");
}

Space build_space(const TriMesh& mesh, SpaceKind kind, const std::vector<std::string>& dirichlet) {
  std::vector<Marker> markers;
  markers.reserve(dirichlet.size());
  for (const auto& name : dirichlet) markers.push_back(parse_marker(name));
  return build_space(mesh, kind, markers);
}

std::vector<unsigned> p2_node_markers(const TriMesh& mesh) {
  const int nv = mesh.num_vertices();
  std::vector<unsigned> markers(nv + mesh.num_edges(), 0);
  for (const auto& be : mesh.boundary_edges()) {
    markers[be.v0] |= marker_bit(be.marker);
    markers[be.v1] |= marker_bit(be.marker);
  }
  std::vector<std::pair<Edge, Marker>> keyed;
  keyed.reserve(mesh.boundary_edges().size());
  for (const auto& be : mesh.boundary_edges()) {
    keyed.push_back({{std::min(be.v0, be.v1), std::max(be.v0, be.v1)}, be.marker});
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges()[e];
    auto it = std::lower_bound(keyed.begin(), keyed.end(), edge,
                               [](const auto& x, const Edge& key) { return x.first < key; });
    if (it != keyed.end() && it->first == edge) markers[nv + e] = marker_bit(it->second);
  }
  return markers;
}

std::vector<Vec2> p2_node_coordinates(const TriMesh& mesh) {
  std::vector<Vec2> nodes(mesh.vertices());
  nodes.reserve(mesh.num_vertices() + mesh.num_edges());
  for (const auto& e : mesh.edges()) nodes.push_back(0.5 * (mesh.vertices()[e[0]] + mesh.vertices()[e[1]]));
  return nodes;
}

}  // namespace shapeopt
