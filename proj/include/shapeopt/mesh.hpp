#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace shapeopt {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Cell = std::array<int, 3>;
using Edge = std::array<int, 2>;

enum class Marker : std::uint8_t { Inflow = 0, Outflow = 1, Wall = 2, Obstacle = 3 };

constexpr unsigned marker_bit(Marker m) { return 1u << static_cast<unsigned>(m); }
constexpr unsigned kOuterMarkers =
    marker_bit(Marker::Inflow) | marker_bit(Marker::Outflow) | marker_bit(Marker::Wall);

std::string_view to_string(Marker m);
/// Accepts the lower-case names used by the mesh file format.
Marker parse_marker(std::string_view name);

struct BoundaryEdge {
  int v0;
  int v1;
  Marker marker;
};

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0, x1, y0, y1;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

/// Conforming triangulation with marked boundary edges.
///
/// Cells are stored counter-clockwise. The connectivity (cells, unique edges,
/// boundary markers) lives in a shared immutable block so that deformed
/// copies of a mesh only carry their own coordinates.
class TriMesh {
 public:
  /// Validates indices, orients cells counter-clockwise and checks that the
  /// boundary edge list covers exactly the edges owned by a single cell.
  TriMesh(std::vector<Vec2> vertices, std::vector<Cell> cells,
          std::vector<BoundaryEdge> boundary);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(topo_->cells.size()); }
  int num_edges() const { return static_cast<int>(topo_->edges.size()); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return topo_->cells; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return topo_->boundary; }
  /// Unique edges with v0 < v1, numbered in first-visit order over cells.
  const std::vector<Edge>& edges() const { return topo_->edges; }
  /// cell_edges()[c][i] joins local vertices i and (i+1)%3.
  const std::vector<std::array<int, 3>>& cell_edges() const { return topo_->cell_edges; }

  unsigned vertex_markers(int v) const { return topo_->vertex_markers[v]; }
  bool vertex_on(int v, Marker m) const { return (topo_->vertex_markers[v] & marker_bit(m)) != 0; }
  bool vertex_on_outer(int v) const { return (topo_->vertex_markers[v] & kOuterMarkers) != 0; }
  /// True if any vertex of the cell lies on the obstacle boundary.
  bool touches_obstacle(int c) const { return topo_->obstacle_patch[c] != 0; }
  bool has_marker(Marker m) const;

  /// Signed area; positive for a valid cell.
  double cell_area(int c) const;
  Vec2 centroid(int c) const;
  /// Constant gradients of the three barycentric coordinates.
  std::array<Vec2, 3> barycentric_gradients(int c) const;

  /// Same connectivity, new coordinates. No orientation check.
  TriMesh with_vertices(std::vector<Vec2> vertices) const;

 private:
  struct Topology {
    std::vector<Cell> cells;
    std::vector<BoundaryEdge> boundary;
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> cell_edges;
    std::vector<unsigned> vertex_markers;
    std::vector<std::uint8_t> obstacle_patch;
  };

  TriMesh(std::vector<Vec2> vertices, std::shared_ptr<const Topology> topo)
      : vertices_(std::move(vertices)), topo_(std::move(topo)) {}

  std::vector<Vec2> vertices_;
  std::shared_ptr<const Topology> topo_;
};

struct QualityReport {
  double edge_length_ratio = 1.0;  ///< longest / shortest obstacle edge
  double min_det_DF = 1.0;         ///< min over cells of det(I + Du)
  double min_cell_angle = 0.0;     ///< radians
};

struct DomainMeasures {
  double area = 0.0;
  Vec2 barycenter = Vec2::Zero();
};

/// O-grid between a rectangular obstacle and the tunnel walls.
///
/// `resolution` is the number of obstacle edges (multiple of 4, >= 8).
/// Rings are geometrically graded so that the first ring is about one
/// obstacle edge thick; `rings == 0` picks the count from a growth factor
/// of at most 1.05. The obstacle must be centred at the origin.
TriMesh generate_channel_mesh(const Rect& tunnel, const Rect& obstacle, int resolution,
                              int rings = 0);

/// Structured nx-by-ny rectangle split into triangles (test fixtures, channels
/// without obstacle). Sides are marked left/right/bottom/top.
TriMesh structured_rectangle_mesh(const Rect& rect, int nx, int ny, Marker left, Marker right,
                                  Marker bottom, Marker top);

/// Red refinement: every cell split into four through its edge midpoints.
TriMesh refine_uniform(const TriMesh& mesh);

/// Throws GeometryError unless the boundary consists of exactly one outer loop
/// (inflow/outflow/wall) and one obstacle loop strictly inside it.
void validate_channel(const TriMesh& mesh);

/// Moves vertices by a P1 field stored as interleaved (x, y) values. The field
/// must vanish on the outer boundary. Throws InversionError on the worst cell
/// if any deformed cell has non-positive area.
TriMesh apply_deformation(const TriMesh& mesh, const Eigen::VectorXd& u);

/// det(I + Du) per cell, computed as deformed over reference area.
std::vector<double> deformation_determinants(const TriMesh& mesh, const Eigen::VectorXd& u);

QualityReport quality_report(const TriMesh& mesh,
                             const std::optional<Eigen::VectorXd>& u = std::nullopt);

/// Area and barycenter of the meshed fluid domain.
DomainMeasures obstacle_measures(const TriMesh& mesh);

/// Vertex indices of the obstacle boundary.
std::vector<int> obstacle_vertices(const TriMesh& mesh);

}  // namespace shapeopt
