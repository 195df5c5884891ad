#include "shapeopt/flow.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/parallel.hpp"
#include "shapeopt/quadrature.hpp"
#include "shapeopt/space.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

namespace shapeopt {
namespace {

constexpr int kLocal = 15;  // 12 velocity + 3 pressure
using LocalMatrix = Eigen::Matrix<double, kLocal, kLocal, Eigen::RowMajor>;
using LocalVector = Eigen::Matrix<double, kLocal, 1>;

// P2 shape functions at the quadrature points of the shared rule.
struct P2Table {
  std::vector<QuadraturePoint> points;
  std::vector<std::array<double, 6>> values;

  P2Table() : points(triangle_rule(kFlowQuadratureDegree)) {
    for (const auto& q : points) {
      std::array<double, 6> n{};
      for (int i = 0; i < 3; ++i) {
        n[i] = q.bary[i] * (2 * q.bary[i] - 1);
        n[3 + i] = 4 * q.bary[i] * q.bary[(i + 1) % 3];
      }
      values.push_back(n);
    }
  }
};

const P2Table& table() {
  static const P2Table t;
  return t;
}

void p2_gradients(const std::array<double, 3>& lam, const std::array<Vec2, 3>& g, std::array<Vec2, 6>& out) {
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    out[i] = (4 * lam[i] - 1) * g[i];
    out[3 + i] = 4 * (lam[i] * g[j] + lam[j] * g[i]);
  }
}

// Global layout of the mixed system.
struct MixedLayout {
  Space velocity;
  int num_velocity = 0;
  int num_pressure = 0;
  std::vector<std::uint8_t> constrained;  // velocity Dirichlet + optional pressure pin
  bool pressure_pinned = false;

  int size() const { return num_velocity + num_pressure; }

  void cell_dofs(const TriMesh& mesh, int c, std::array<int, kLocal>& dofs) const {
    const auto vd = velocity.cell_dofs(c);
    for (int i = 0; i < 12; ++i) dofs[i] = vd[i];
    for (int i = 0; i < 3; ++i) dofs[12 + i] = num_velocity + mesh.cells()[c][i];
  }
};

MixedLayout make_layout(const TriMesh& mesh) {
  MixedLayout L;
  L.velocity = build_space(mesh, SpaceKind::P2Vector, {Marker::Inflow, Marker::Wall, Marker::Obstacle});
  L.num_velocity = L.velocity.num_dofs();
  L.num_pressure = mesh.num_vertices();
  L.constrained = L.velocity.dirichlet_mask();
  L.constrained.resize(L.size(), 0);
  // Without an outflow boundary the pressure is only defined up to a constant.
  if (!mesh.has_marker(Marker::Outflow)) {
    L.pressure_pinned = true;
    L.constrained[L.num_velocity] = 1;
  }
  return L;
}

Vector pack(const FlowSolution& s) {
  Vector x(s.velocity.size() + s.pressure.size());
  x << s.velocity, s.pressure;
  return x;
}

void unpack(const MixedLayout& L, const Vector& x, FlowSolution& s) {
  s.velocity = x.head(L.num_velocity);
  s.pressure = x.tail(L.num_pressure);
}

struct CellState {
  std::array<double, 12> v;
  std::array<double, 3> p;
};

CellState gather(const std::array<int, kLocal>& dofs, const Vector& x) {
  CellState s;
  for (int i = 0; i < 12; ++i) s.v[i] = x[dofs[i]];
  for (int i = 0; i < 3; ++i) s.p[i] = x[dofs[12 + i]];
  return s;
}

// Local residual and Newton matrix of
//   nu (Dv, Dphi) + ((Dv) v, phi) - (p, div phi) - (f, phi) - (psi, div v).
void element(const TriMesh& mesh, const FlowConfig& cfg, int c, const CellState& s, bool convective,
             LocalMatrix* K, LocalVector* R) {
  const P2Table& tab = table();
  const auto g = mesh.barycentric_gradients(c);
  const double area = mesh.cell_area(c);
  const auto& cell = mesh.cells()[c];
  const double nu = cfg.nu;
  if (K) K->setZero();
  if (R) R->setZero();
  std::array<Vec2, 6> dN;
  for (std::size_t q = 0; q < tab.points.size(); ++q) {
    const auto& lam = tab.points[q].bary;
    const auto& N = tab.values[q];
    const double w = tab.points[q].weight * area;
    p2_gradients(lam, g, dN);
    Vec2 v = Vec2::Zero();
    Mat2 Dv = Mat2::Zero();
    for (int n = 0; n < 6; ++n) {
      const Vec2 vn(s.v[2 * n], s.v[2 * n + 1]);
      v += N[n] * vn;
      Dv += vn * dN[n].transpose();
    }
    const double p = lam[0] * s.p[0] + lam[1] * s.p[1] + lam[2] * s.p[2];
    const double divv = Dv.trace();

    if (R) {
      Vec2 f = Vec2::Zero();
      if (cfg.forcing) {
        const Vec2 xq = lam[0] * mesh.vertices()[cell[0]] + lam[1] * mesh.vertices()[cell[1]] +
                        lam[2] * mesh.vertices()[cell[2]];
        f = cfg.forcing(xq);
      }
      const Vec2 conv = convective ? Vec2(Dv * v) : Vec2::Zero();
      for (int a = 0; a < 6; ++a) {
        const Vec2 visc = nu * (Dv * dN[a]);
        for (int k = 0; k < 2; ++k) {
          (*R)[2 * a + k] += w * (visc[k] + N[a] * (conv[k] - f[k]) - p * dN[a][k]);
        }
      }
      for (int a = 0; a < 3; ++a) (*R)[12 + a] -= w * lam[a] * divv;
    }
    if (K) {
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double diff = nu * dN[a].dot(dN[b]) + (convective ? N[a] * dN[b].dot(v) : 0.0);
          for (int k = 0; k < 2; ++k) {
            (*K)(2 * a + k, 2 * b + k) += w * diff;
            if (convective) {
              for (int l = 0; l < 2; ++l) (*K)(2 * a + k, 2 * b + l) += w * N[a] * Dv(k, l) * N[b];
            }
          }
        }
        for (int b = 0; b < 3; ++b) {
          for (int k = 0; k < 2; ++k) {
            const double bk = -w * lam[b] * dN[a][k];
            (*K)(2 * a + k, 12 + b) += bk;
            (*K)(12 + b, 2 * a + k) += bk;
          }
        }
      }
    }
  }
}

// Assembles over cells in blocks: element work in parallel, scatter in cell
// order so the result does not depend on the thread count.
void assemble_system(const TriMesh& mesh, const FlowConfig& cfg, const MixedLayout& L, const Vector& x,
                     bool convective, SparseMatrix* K, Vector* R) {
  const int nc = mesh.num_cells();
  constexpr int kBlock = 4096;
  MatrixAssembler asmb(L.size(), L.size(), K ? static_cast<std::size_t>(nc) * kLocal * kLocal : 0);
  if (R) *R = Vector::Zero(L.size());
  std::vector<LocalMatrix> Ks(K ? kBlock : 0);
  std::vector<LocalVector> Rs(R ? kBlock : 0);
  std::vector<std::array<int, kLocal>> dofs(kBlock);
  for (int begin = 0; begin < nc; begin += kBlock) {
    const int count = std::min(kBlock, nc - begin);
    parallel_for(count, [&](int i) {
      const int c = begin + i;
      L.cell_dofs(mesh, c, dofs[i]);
      element(mesh, cfg, c, gather(dofs[i], x), convective, K ? &Ks[i] : nullptr, R ? &Rs[i] : nullptr);
    });
    for (int i = 0; i < count; ++i) {
      if (K) asmb.add(dofs[i], dofs[i], Ks[i]);
      if (R) {
        for (int a = 0; a < kLocal; ++a) (*R)[dofs[i][a]] += Rs[i][a];
      }
    }
  }
  if (K) *K = asmb.finish();
}

double free_norm(const Vector& r, const std::vector<std::uint8_t>& constrained) {
  double s = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!constrained[i]) s += r[i] * r[i];
  }
  return std::sqrt(s);
}

Vector solve_linear(SparseMatrix A, Vector b, const std::vector<std::uint8_t>& constrained, const FlowConfig& cfg) {
  apply_dirichlet(A, b, constrained);
  return linear_solve(A, b, cfg.solver);
}

void shift_to_zero_mean(const TriMesh& mesh, Vector& p) {
  // exact for P1: int p = sum |T| (p0 + p1 + p2) / 3
  double integral = 0, area = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cells()[c];
    const double a = mesh.cell_area(c);
    integral += a * (p[cell[0]] + p[cell[1]] + p[cell[2]]) / 3.0;
    area += a;
  }
  p.array() -= integral / area;
}

void check_topology(const TriMesh& mesh, const FlowSolution& s, const char* what) {
  const MixedLayout L = make_layout(mesh);
  if (s.velocity.size() != L.num_velocity || s.pressure.size() != L.num_pressure) {
    throw InputError(std::string(what) + ": solution does not match the mesh");
  }
}

}  // namespace

Vector dirichlet_velocity(const TriMesh& mesh, const FlowConfig& cfg) {
  const auto nodes = p2_node_coordinates(mesh);
  const auto markers = p2_node_markers(mesh);
  Vector values = Vector::Zero(2 * static_cast<Eigen::Index>(nodes.size()));
  if (cfg.inflow == InflowProfile::Zero || !mesh.has_marker(Marker::Inflow)) return values;

  double y0 = 1e300, y1 = -1e300;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (markers[n] & marker_bit(Marker::Inflow)) {
      y0 = std::min(y0, nodes[n].y());
      y1 = std::max(y1, nodes[n].y());
    }
  }
  const double yc = 0.5 * (y0 + y1), height = y1 - y0;
  const unsigned noslip = marker_bit(Marker::Wall) | marker_bit(Marker::Obstacle);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (!(markers[n] & marker_bit(Marker::Inflow)) || (markers[n] & noslip)) continue;
    const double s = (nodes[n].y() - yc) / height;  // in [-1/2, 1/2]
    const double profile =
        cfg.inflow == InflowProfile::Cosine ? std::cos(std::numbers::pi * s) : 1.0 - 4.0 * s * s;
    values[2 * n] = cfg.inflow_amplitude * profile;
  }
  return values;
}

FlowSolution solve_state(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution* initial_guess) {
  if (!(cfg.nu > 0)) throw InputError("viscosity must be positive");
  const MixedLayout L = make_layout(mesh);
  const Vector bc = dirichlet_velocity(mesh, cfg);

  Vector x = Vector::Zero(L.size());
  FlowSolution out;
  SparseMatrix K;
  Vector R;

  assemble_system(mesh, cfg, L, [&] {
    Vector x0 = Vector::Zero(L.size());
    x0.head(L.num_velocity) = bc;
    return x0;
  }(), true, nullptr, &R);
  const double reference = free_norm(R, L.constrained);
  const double tol = std::max(cfg.newton_rtol * reference, cfg.newton_atol);

  if (initial_guess) {
    check_topology(mesh, *initial_guess, "solve_state");
    x = pack(*initial_guess);
    for (int i = 0; i < L.num_velocity; ++i) {
      if (L.constrained[i]) x[i] = bc[i];
    }
  } else {
    // Stokes start: one linear solve without the convective term.
    x.head(L.num_velocity) = bc;
    assemble_system(mesh, cfg, L, x, false, &K, &R);
    x -= solve_linear(K, R, L.constrained, cfg);
    ++out.linear_solves;
  }

  assemble_system(mesh, cfg, L, x, true, nullptr, &R);
  double res = free_norm(R, L.constrained);
  out.residual_history.push_back(res);
  while (res > tol) {
    if (out.newton_iterations == cfg.newton_max_iterations) {
      std::ostringstream msg;
      msg << "Navier-Stokes Newton did not converge in " << cfg.newton_max_iterations << " iterations (residual "
          << res << ", target " << tol << ")";
      throw NonconvergenceError(msg.str(), out.residual_history);
    }
    assemble_system(mesh, cfg, L, x, true, &K, nullptr);
    const Vector dx = solve_linear(K, R, L.constrained, cfg);
    ++out.linear_solves;
    ++out.newton_iterations;
    double step = 1.0;
    Vector trial, Rt;
    double rt = 0;
    for (int halving = 0;; ++halving) {
      trial = x - step * dx;
      assemble_system(mesh, cfg, L, trial, true, nullptr, &Rt);
      rt = free_norm(Rt, L.constrained);
      if (rt < res || halving == 10) break;
      step *= 0.5;
    }
    if (!(rt < res) && rt > tol) {
      std::ostringstream msg;
      msg << "Navier-Stokes Newton stalled at residual " << res << " (target " << tol << ")";
      out.residual_history.push_back(rt);
      throw NonconvergenceError(msg.str(), out.residual_history);
    }
    x = std::move(trial);
    R = std::move(Rt);
    res = rt;
    out.residual_history.push_back(res);
  }
  unpack(L, x, out);
  if (L.pressure_pinned) shift_to_zero_mean(mesh, out.pressure);
  return out;
}

double energy(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state) {
  check_topology(mesh, state, "energy");
  const P2Table& tab = table();
  const Space V = build_space(mesh, SpaceKind::P2Vector);
  std::vector<double> per_cell(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](int c) {
    const auto g = mesh.barycentric_gradients(c);
    const auto dofs = V.cell_dofs(c);
    std::array<Vec2, 6> dN;
    double sum = 0;
    for (std::size_t q = 0; q < tab.points.size(); ++q) {
      p2_gradients(tab.points[q].bary, g, dN);
      Mat2 Dv = Mat2::Zero();
      for (int n = 0; n < 6; ++n) Dv += Vec2(state.velocity[dofs[2 * n]], state.velocity[dofs[2 * n + 1]]) * dN[n].transpose();
      sum += tab.points[q].weight * Dv.squaredNorm();
    }
    per_cell[c] = mesh.cell_area(c) * sum;
  });
  double total = 0;
  for (double e : per_cell) total += e;
  return 0.5 * cfg.nu * total;
}

SparseMatrix navier_stokes_jacobian(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state) {
  check_topology(mesh, state, "navier_stokes_jacobian");
  const MixedLayout L = make_layout(mesh);
  SparseMatrix K;
  assemble_system(mesh, cfg, L, pack(state), true, &K, nullptr);
  return K;
}

SparseMatrix adjoint_operator(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state) {
  return SparseMatrix(navier_stokes_jacobian(mesh, cfg, state).transpose());
}

FlowSolution solve_adjoint(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state) {
  const MixedLayout L = make_layout(mesh);
  const SparseMatrix A = adjoint_operator(mesh, cfg, state);

  // -nu int Dv : Dphi, i.e. minus the velocity derivative of the energy
  FlowConfig stokes = cfg;
  stokes.forcing = nullptr;
  SparseMatrix K;
  FlowSolution vel_only = state;
  vel_only.pressure.setZero();
  Vector b;
  assemble_system(mesh, stokes, L, pack(vel_only), false, nullptr, &b);
  b.tail(L.num_pressure).setZero();
  b = -b;

  FlowSolution out;
  const Vector x = solve_linear(A, b, L.constrained, cfg);
  out.linear_solves = 1;
  unpack(L, x, out);
  if (L.pressure_pinned) shift_to_zero_mean(mesh, out.pressure);
  return out;
}

ShapeGradient shape_derivative(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state,
                               const FlowSolution& adjoint, bool restrict_to_obstacle) {
  check_topology(mesh, state, "shape_derivative");
  check_topology(mesh, adjoint, "shape_derivative");
  const P2Table& tab = table();
  const Space V = build_space(mesh, SpaceKind::P2Vector);
  const double nu = cfg.nu;
  const int nc = mesh.num_cells();

  ShapeGradient out;
  out.cell_mask.assign(nc, 0);
  for (int c = 0; c < nc; ++c) out.cell_mask[c] = !restrict_to_obstacle || mesh.touches_obstacle(c);

  // Cell integral of G with J'[u] = sum_T G_T : Du|_T
  std::vector<Mat2> G(nc, Mat2::Zero());
  parallel_for(nc, [&](int c) {
    if (!out.cell_mask[c]) return;
    const auto g = mesh.barycentric_gradients(c);
    const auto dofs = V.cell_dofs(c);
    const auto& cell = mesh.cells()[c];
    std::array<Vec2, 6> dN;
    Mat2 sum = Mat2::Zero();
    for (std::size_t q = 0; q < tab.points.size(); ++q) {
      const auto& lam = tab.points[q].bary;
      const auto& N = tab.values[q];
      p2_gradients(lam, g, dN);
      Vec2 v = Vec2::Zero(), w = Vec2::Zero();
      Mat2 Dv = Mat2::Zero(), Dw = Mat2::Zero();
      for (int n = 0; n < 6; ++n) {
        const Vec2 vn(state.velocity[dofs[2 * n]], state.velocity[dofs[2 * n + 1]]);
        const Vec2 wn(adjoint.velocity[dofs[2 * n]], adjoint.velocity[dofs[2 * n + 1]]);
        v += N[n] * vn;
        w += N[n] * wn;
        Dv += vn * dN[n].transpose();
        Dw += wn * dN[n].transpose();
      }
      double p = 0, r = 0;
      for (int i = 0; i < 3; ++i) {
        p += lam[i] * state.pressure[cell[i]];
        r += lam[i] * adjoint.pressure[cell[i]];
      }
      const double lagrangian = 0.5 * nu * Dv.squaredNorm() + nu * Dv.cwiseProduct(Dw).sum() + (Dv * v).dot(w) -
                                p * Dw.trace() - r * Dv.trace();
      Mat2 Gq = lagrangian * Mat2::Identity();
      Gq -= nu * (Dv.transpose() * Dv + Dv.transpose() * Dw + Dw.transpose() * Dv);
      Gq -= (Dv.transpose() * w) * v.transpose();
      Gq += p * Dw.transpose() + r * Dv.transpose();
      sum += tab.points[q].weight * Gq;
    }
    G[c] = mesh.cell_area(c) * sum;
  });

  out.dual = Vector::Zero(2 * mesh.num_vertices());
  for (int c = 0; c < nc; ++c) {
    if (!out.cell_mask[c]) continue;
    const auto g = mesh.barycentric_gradients(c);
    for (int i = 0; i < 3; ++i) {
      const int vtx = mesh.cells()[c][i];
      const Vec2 contrib = G[c] * g[i];
      out.dual[2 * vtx] += contrib.x();
      out.dual[2 * vtx + 1] += contrib.y();
    }
  }
  // The restricted functional is a sum of point values at the obstacle
  // vertices; entries on the inner ring of the patch are dropped as well.
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const bool keep = restrict_to_obstacle ? mesh.vertex_on(v, Marker::Obstacle) && !mesh.vertex_on_outer(v)
                                           : !mesh.vertex_on_outer(v);
    if (!keep) out.dual[2 * v] = out.dual[2 * v + 1] = 0.0;
  }
  return out;
}

std::vector<VtkField> flow_fields(const TriMesh& mesh, const FlowSolution& state, const FlowSolution* adjoint) {
  const int nv = mesh.num_vertices();
  auto vertex_velocity = [&](const FlowSolution& s) {
    return std::vector<double>(s.velocity.data(), s.velocity.data() + 2 * nv);
  };
  std::vector<double> speed(nv);
  for (int v = 0; v < nv; ++v) speed[v] = std::hypot(state.velocity[2 * v], state.velocity[2 * v + 1]);
  std::vector<VtkField> fields{{"velocity", 2, vertex_velocity(state)},
                               {"speed", 1, speed},
                               {"pressure", 1, {state.pressure.data(), state.pressure.data() + nv}}};
  if (adjoint) {
    fields.push_back({"adjoint_velocity", 2, vertex_velocity(*adjoint)});
    fields.push_back({"adjoint_pressure", 1, {adjoint->pressure.data(), adjoint->pressure.data() + nv}});
  }
  return fields;
}

}  // namespace shapeopt
