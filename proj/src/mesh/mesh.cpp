#include "shapeopt/mesh.hpp"

#include "shapeopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>

namespace shapeopt {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

std::string_view to_string(Marker m) {
  switch (m) {
    case Marker::Inflow: return "inflow";
    case Marker::Outflow: return "outflow";
    case Marker::Wall: return "wall";
    case Marker::Obstacle: return "obstacle";
  }
  return "?";
}

Marker parse_marker(std::string_view name) {
  if (name == "inflow") return Marker::Inflow;
  if (name == "outflow") return Marker::Outflow;
  if (name == "wall") return Marker::Wall;
  if (name == "obstacle") return Marker::Obstacle;
  throw InputError("unknown boundary marker '" + std::string(name) + "'");
}

TriMesh::TriMesh(std::vector<Vec2> vertices, std::vector<Cell> cells,
                 std::vector<BoundaryEdge> boundary)
    : vertices_(std::move(vertices)) {
  const int nv = static_cast<int>(vertices_.size());
  auto topo = std::make_shared<Topology>();

  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    for (int v : cell) {
      if (v < 0 || v >= nv) throw InputError("cell " + std::to_string(c) + " references vertex " + std::to_string(v));
    }
    const double a = signed_area(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]]);
    if (!(std::abs(a) > 0.0)) throw GeometryError("cell " + std::to_string(c) + " is degenerate");
    if (a < 0.0) std::swap(cell[1], cell[2]);
  }

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(cells.size() * 2);
  std::vector<int> edge_owners;
  topo->cell_edges.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int i = 0; i < 3; ++i) {
      const int a = cells[c][i], b = cells[c][(i + 1) % 3];
      auto [it, inserted] = edge_index.try_emplace(edge_key(a, b), static_cast<int>(topo->edges.size()));
      if (inserted) {
        topo->edges.push_back({std::min(a, b), std::max(a, b)});
        edge_owners.push_back(0);
      }
      topo->cell_edges[c][i] = it->second;
      ++edge_owners[it->second];
    }
  }

  std::vector<std::uint8_t> seen(topo->edges.size(), 0);
  topo->vertex_markers.assign(nv, 0u);
  for (const auto& be : boundary) {
    auto it = edge_index.find(edge_key(be.v0, be.v1));
    if (it == edge_index.end()) {
      throw InputError("boundary edge (" + std::to_string(be.v0) + ", " + std::to_string(be.v1) +
                       ") is not a mesh edge");
    }
    if (edge_owners[it->second] != 1) throw InputError("boundary edge is shared by two cells");
    if (seen[it->second]++) throw InputError("duplicate boundary edge");
    topo->vertex_markers[be.v0] |= marker_bit(be.marker);
    topo->vertex_markers[be.v1] |= marker_bit(be.marker);
  }
  for (std::size_t e = 0; e < edge_owners.size(); ++e) {
    if (edge_owners[e] == 1 && !seen[e]) {
      throw InputError("unmarked boundary edge (" + std::to_string(topo->edges[e][0]) + ", " +
                       std::to_string(topo->edges[e][1]) + ")");
    }
    if (edge_owners[e] > 2) throw InputError("non-manifold edge");
  }

  topo->obstacle_patch.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::uint8_t touches = 0;
    for (int v : cells[c]) touches |= (topo->vertex_markers[v] & marker_bit(Marker::Obstacle)) ? 1 : 0;
    topo->obstacle_patch[c] = touches;
  }

  topo->cells = std::move(cells);
  topo->boundary = std::move(boundary);
  topo_ = std::move(topo);
}

bool TriMesh::has_marker(Marker m) const {
  return std::any_of(topo_->boundary.begin(), topo_->boundary.end(),
                     [m](const BoundaryEdge& e) { return e.marker == m; });
}

double TriMesh::cell_area(int c) const {
  const auto& cell = topo_->cells[c];
  return signed_area(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]]);
}

Vec2 TriMesh::centroid(int c) const {
  const auto& cell = topo_->cells[c];
  return (vertices_[cell[0]] + vertices_[cell[1]] + vertices_[cell[2]]) / 3.0;
}

std::array<Vec2, 3> TriMesh::barycentric_gradients(int c) const {
  const auto& cell = topo_->cells[c];
  const Vec2& p0 = vertices_[cell[0]];
  const Vec2& p1 = vertices_[cell[1]];
  const Vec2& p2 = vertices_[cell[2]];
  const double two_area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
  const double inv = 1.0 / two_area;
  // grad lambda_i = rot90(opposite edge) / (2|T|)
  return {Vec2((p1.y() - p2.y()) * inv, (p2.x() - p1.x()) * inv),
          Vec2((p2.y() - p0.y()) * inv, (p0.x() - p2.x()) * inv),
          Vec2((p0.y() - p1.y()) * inv, (p1.x() - p0.x()) * inv)};
}

TriMesh TriMesh::with_vertices(std::vector<Vec2> vertices) const {
  if (vertices.size() != vertices_.size()) throw InputError("vertex count mismatch");
  return TriMesh(std::move(vertices), topo_);
}

namespace {

/// Smallest growth factor r >= 1 with first-ring thickness `first` for a
/// total normalised depth of 1 split into `rings` layers.
double grading_factor(double first, int rings) {
  if (first * rings >= 1.0) return 1.0;
  auto first_of = [rings](double r) { return (r - 1.0) / (std::pow(r, rings) - 1.0); };
  double lo = 1.0 + 1e-12, hi = 2.0;
  while (first_of(hi) > first) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (first_of(mid) > first ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Point at parameter index j on the boundary of `r`, CCW from the lower-left
/// corner, with nx edges along horizontal and ny along vertical sides.
Vec2 ring_point(const Rect& r, int nx, int ny, int j) {
  if (j < nx) return {r.x0 + r.width() * j / nx, r.y0};
  j -= nx;
  if (j < ny) return {r.x1, r.y0 + r.height() * j / ny};
  j -= ny;
  if (j < nx) return {r.x1 - r.width() * j / nx, r.y1};
  j -= nx;
  return {r.x0, r.y1 - r.height() * j / ny};
}

void check_rect(const Rect& r, const char* what) {
  if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw InputError(std::string("degenerate ") + what + " rectangle");
}

}  // namespace

TriMesh generate_channel_mesh(const Rect& tunnel, const Rect& obstacle, int resolution, int rings) {
  check_rect(tunnel, "tunnel");
  check_rect(obstacle, "obstacle");
  if (resolution < 8 || resolution % 4 != 0) {
    throw InputError("obstacle resolution must be a multiple of 4 and at least 8, got " +
                     std::to_string(resolution));
  }
  if (!(obstacle.x0 > tunnel.x0 && obstacle.x1 < tunnel.x1 && obstacle.y0 > tunnel.y0 &&
        obstacle.y1 < tunnel.y1)) {
    throw GeometryError("obstacle must lie strictly inside the tunnel");
  }
  const Vec2 oc = obstacle.center();
  if (std::abs(oc.x()) > 1e-14 * obstacle.width() || std::abs(oc.y()) > 1e-14 * obstacle.height()) {
    throw InputError("obstacle must be centred at the origin");
  }
  if (rings < 0) throw InputError("ring count must be non-negative");

  const int half = resolution / 2;
  int nx = static_cast<int>(std::lround(half * obstacle.width() / (obstacle.width() + obstacle.height())));
  nx = std::clamp(nx, 1, half - 1);
  const int ny = half - nx;
  const int n = 2 * (nx + ny);

  const double h = std::min(obstacle.width() / nx, obstacle.height() / ny);
  const double gap = std::min({obstacle.x0 - tunnel.x0, tunnel.x1 - obstacle.x1,
                               obstacle.y0 - tunnel.y0, tunnel.y1 - obstacle.y1});
  if (rings == 0) {
    rings = 1;
    while (grading_factor(h / gap, rings) > 1.05) ++rings;
  }
  const double growth = grading_factor(h / gap, rings);
  std::vector<double> s(rings + 1);
  for (int k = 0; k <= rings; ++k) {
    s[k] = growth == 1.0 ? static_cast<double>(k) / rings
                         : (std::pow(growth, k) - 1.0) / (std::pow(growth, rings) - 1.0);
  }
  s[rings] = 1.0;

  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(rings + 1) * n);
  for (int k = 0; k <= rings; ++k) {
    const Rect ring{obstacle.x0 + s[k] * (tunnel.x0 - obstacle.x0), obstacle.x1 + s[k] * (tunnel.x1 - obstacle.x1),
                    obstacle.y0 + s[k] * (tunnel.y0 - obstacle.y0), obstacle.y1 + s[k] * (tunnel.y1 - obstacle.y1)};
    for (int j = 0; j < n; ++j) vertices.push_back(ring_point(k == 0 ? obstacle : (k == rings ? tunnel : ring), nx, ny, j));
  }

  auto id = [n](int k, int j) { return k * n + (j % n); };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(2) * rings * n);
  for (int k = 0; k < rings; ++k) {
    for (int j = 0; j < n; ++j) {
      const int a = id(k, j), b = id(k + 1, j), c = id(k + 1, j + 1), d = id(k, j + 1);
      const Vec2 mid = 0.25 * (vertices[a] + vertices[b] + vertices[c] + vertices[d]);
      // Diagonal choice mirrors across both axes, so the mesh inherits the
      // symmetry of the rectangles.
      if (mid.x() * mid.y() > 0.0) {
        cells.push_back({a, b, c});
        cells.push_back({a, c, d});
      } else {
        cells.push_back({a, b, d});
        cells.push_back({b, c, d});
      }
    }
  }

  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * n);
  for (int j = 0; j < n; ++j) boundary.push_back({id(0, j), id(0, j + 1), Marker::Obstacle});
  for (int j = 0; j < n; ++j) {
    Marker m;
    if (j < nx) m = Marker::Wall;
    else if (j < nx + ny) m = Marker::Outflow;
    else if (j < 2 * nx + ny) m = Marker::Wall;
    else m = Marker::Inflow;
    boundary.push_back({id(rings, j), id(rings, j + 1), m});
  }

  TriMesh mesh(std::move(vertices), std::move(cells), std::move(boundary));
  validate_channel(mesh);
  return mesh;
}

TriMesh structured_rectangle_mesh(const Rect& rect, int nx, int ny, Marker left, Marker right,
                                  Marker bottom, Marker top) {
  check_rect(rect, "domain");
  if (nx < 1 || ny < 1) throw InputError("structured mesh needs at least one cell per direction");
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      vertices.emplace_back(i == nx ? rect.x1 : rect.x0 + rect.width() * i / nx,
                            j == ny ? rect.y1 : rect.y0 + rect.height() * j / ny);
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  const Vec2 center = rect.center();
  std::vector<Cell> cells;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      const Vec2 mid = 0.25 * (vertices[a] + vertices[b] + vertices[c] + vertices[d]) - center;
      if (mid.x() * mid.y() >= 0.0) {
        cells.push_back({a, b, c});
        cells.push_back({a, c, d});
      } else {
        cells.push_back({a, b, d});
        cells.push_back({b, c, d});
      }
    }
  }
  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < nx; ++i) boundary.push_back({id(i, 0), id(i + 1, 0), bottom});
  for (int j = 0; j < ny; ++j) boundary.push_back({id(nx, j), id(nx, j + 1), right});
  for (int i = nx; i > 0; --i) boundary.push_back({id(i, ny), id(i - 1, ny), top});
  for (int j = ny; j > 0; --j) boundary.push_back({id(0, j), id(0, j - 1), left});
  return TriMesh(std::move(vertices), std::move(cells), std::move(boundary));
}

TriMesh refine_uniform(const TriMesh& mesh) {
  const int nv = mesh.num_vertices();
  std::vector<Vec2> vertices = mesh.vertices();
  vertices.reserve(nv + mesh.num_edges());
  for (const auto& e : mesh.edges()) vertices.push_back(0.5 * (mesh.vertices()[e[0]] + mesh.vertices()[e[1]]));

  std::vector<Cell> cells;
  cells.reserve(4 * static_cast<std::size_t>(mesh.num_cells()));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& [a, b, d] = mesh.cells()[c];
    const auto& ce = mesh.cell_edges()[c];
    const int m01 = nv + ce[0], m12 = nv + ce[1], m20 = nv + ce[2];
    cells.push_back({a, m01, m20});
    cells.push_back({m01, b, m12});
    cells.push_back({m20, m12, d});
    cells.push_back({m01, m12, m20});
  }

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e) edge_index.emplace(edge_key(mesh.edges()[e][0], mesh.edges()[e][1]), e);
  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * mesh.boundary_edges().size());
  for (const auto& be : mesh.boundary_edges()) {
    const int mid = nv + edge_index.at(edge_key(be.v0, be.v1));
    boundary.push_back({be.v0, mid, be.marker});
    boundary.push_back({mid, be.v1, be.marker});
  }
  return TriMesh(std::move(vertices), std::move(cells), std::move(boundary));
}

namespace {

/// Splits boundary edges into closed loops; returns vertex loops with the
/// marker set seen on each.
std::vector<std::pair<std::vector<int>, unsigned>> boundary_loops(const TriMesh& mesh) {
  std::unordered_map<int, std::vector<std::size_t>> incident;
  const auto& edges = mesh.boundary_edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    incident[edges[i].v0].push_back(i);
    incident[edges[i].v1].push_back(i);
  }
  for (const auto& [v, list] : incident) {
    if (list.size() != 2) throw GeometryError("boundary vertex " + std::to_string(v) + " is not on a simple loop");
  }
  std::vector<std::uint8_t> used(edges.size(), 0);
  std::vector<std::pair<std::vector<int>, unsigned>> loops;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<int> loop;
    unsigned markers = 0;
    std::size_t e = start;
    int v = edges[e].v0;
    while (!used[e]) {
      used[e] = 1;
      markers |= marker_bit(edges[e].marker);
      loop.push_back(v);
      v = edges[e].v0 == v ? edges[e].v1 : edges[e].v0;
      const auto& inc = incident[v];
      e = inc[0] == e ? inc[1] : inc[0];
    }
    loops.emplace_back(std::move(loop), markers);
  }
  return loops;
}

}  // namespace

void validate_channel(const TriMesh& mesh) {
  auto loops = boundary_loops(mesh);
  if (loops.size() != 2) throw GeometryError("expected an outer loop and an obstacle loop, found " + std::to_string(loops.size()) + " loops");
  const auto obstacle_it = std::find_if(loops.begin(), loops.end(), [](const auto& l) { return l.second == marker_bit(Marker::Obstacle); });
  if (obstacle_it == loops.end()) throw GeometryError("no loop consists solely of obstacle edges");
  const auto& outer = loops[obstacle_it == loops.begin() ? 1 : 0];
  if ((outer.second & marker_bit(Marker::Obstacle)) != 0 || (outer.second & kOuterMarkers) == 0) {
    throw GeometryError("outer loop carries obstacle markers");
  }
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (int v : outer.first) {
    const Vec2& p = mesh.vertices()[v];
    x0 = std::min(x0, p.x()); x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y()); y1 = std::max(y1, p.y());
  }
  for (int v : obstacle_it->first) {
    const Vec2& p = mesh.vertices()[v];
    if (!(p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1)) {
      throw GeometryError("obstacle vertex " + std::to_string(v) + " touches the tunnel boundary");
    }
  }
}

std::vector<double> deformation_determinants(const TriMesh& mesh, const Eigen::VectorXd& u) {
  if (u.size() != 2 * mesh.num_vertices()) throw InputError("deformation size does not match mesh");
  std::vector<double> det(mesh.num_cells());
  const auto& x = mesh.vertices();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cells()[c];
    Vec2 p[3];
    for (int i = 0; i < 3; ++i) p[i] = x[cell[i]] + Vec2(u[2 * cell[i]], u[2 * cell[i] + 1]);
    det[c] = signed_area(p[0], p[1], p[2]) / mesh.cell_area(c);
  }
  return det;
}

TriMesh apply_deformation(const TriMesh& mesh, const Eigen::VectorXd& u) {
  if (u.size() != 2 * mesh.num_vertices()) throw InputError("deformation size does not match mesh");
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.vertex_on_outer(v) && (u[2 * v] != 0.0 || u[2 * v + 1] != 0.0)) {
      throw InputError("deformation does not vanish on the outer boundary at vertex " + std::to_string(v));
    }
  }
  const auto det = deformation_determinants(mesh, u);
  const auto worst = std::min_element(det.begin(), det.end());
  if (worst != det.end() && !(*worst > 0.0)) {
    throw InversionError(static_cast<int>(worst - det.begin()), *worst);
  }
  std::vector<Vec2> moved(mesh.vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) moved[v] += Vec2(u[2 * v], u[2 * v + 1]);
  return mesh.with_vertices(std::move(moved));
}

QualityReport quality_report(const TriMesh& mesh, const std::optional<Eigen::VectorXd>& u) {
  if (u && u->size() != 2 * mesh.num_vertices()) throw InputError("deformation size does not match mesh");
  auto pos = [&](int v) -> Vec2 {
    Vec2 p = mesh.vertices()[v];
    if (u) p += Vec2((*u)[2 * v], (*u)[2 * v + 1]);
    return p;
  };
  QualityReport report;
  double longest = 0.0, shortest = std::numeric_limits<double>::infinity();
  for (const auto& be : mesh.boundary_edges()) {
    if (be.marker != Marker::Obstacle) continue;
    const double len = (pos(be.v1) - pos(be.v0)).norm();
    longest = std::max(longest, len);
    shortest = std::min(shortest, len);
  }
  report.edge_length_ratio = longest > 0.0 ? longest / shortest : 1.0;
  if (u) {
    const auto det = deformation_determinants(mesh, *u);
    report.min_det_DF = det.empty() ? 1.0 : *std::min_element(det.begin(), det.end());
  }
  double min_angle = std::numbers::pi;
  for (const auto& cell : mesh.cells()) {
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = pos(cell[(i + 1) % 3]) - pos(cell[i]);
      const Vec2 b = pos(cell[(i + 2) % 3]) - pos(cell[i]);
      const double cross = a.x() * b.y() - a.y() * b.x();
      min_angle = std::min(min_angle, std::atan2(cross, a.dot(b)));
    }
  }
  report.min_cell_angle = min_angle;
  return report;
}

DomainMeasures obstacle_measures(const TriMesh& mesh) {
  // Neumaier summation keeps the totals independent of the cell count.
  struct Sum {
    double s = 0, c = 0;
    void add(double x) {
      const double t = s + x;
      c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
      s = t;
    }
    double value() const { return s + c; }
  } area, mx, my;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double a = mesh.cell_area(c);
    const Vec2 g = mesh.centroid(c);
    area.add(a);
    mx.add(a * g.x());
    my.add(a * g.y());
  }
  DomainMeasures m;
  m.area = area.value();
  m.barycenter = Vec2(mx.value(), my.value()) / m.area;
  return m;
}

std::vector<int> obstacle_vertices(const TriMesh& mesh) {
  std::vector<int> out;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.vertex_on(v, Marker::Obstacle)) out.push_back(v);
  }
  return out;
}

}  // namespace shapeopt
