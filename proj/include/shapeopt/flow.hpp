#pragma once

#include "shapeopt/linear_solver.hpp"
#include "shapeopt/mesh_io.hpp"
#include "shapeopt/sparse.hpp"

#include <functional>
#include <vector>

namespace shapeopt {

enum class InflowProfile {
  Cosine,     ///< cos(pi (y - yc) / H) across an inflow of height H
  Parabolic,  ///< 1 - (2 (y - yc) / H)^2
  Zero,
};

struct FlowConfig {
  double nu = 0.02;
  InflowProfile inflow = InflowProfile::Cosine;
  double inflow_amplitude = 1.0;
  double newton_rtol = 1e-10;
  double newton_atol = 1e-13;
  int newton_max_iterations = 25;
  SolverMethod solver = SolverMethod::DirectSparse;
  /// Optional body force, used by manufactured-solution tests.
  std::function<Vec2(const Vec2&)> forcing;
};

/// Velocity on the P2 vector space (interleaved, vertices then edge
/// midpoints) and pressure on P1. Also holds adjoint pairs (w, r).
struct FlowSolution {
  Vector velocity;
  Vector pressure;
  int newton_iterations = 0;
  int linear_solves = 0;
  std::vector<double> residual_history;
};

/// Dual vector on the P1 vector space, zero on the outer boundary.
struct ShapeGradient {
  Vector dual;
  /// Cells that contributed to the assembly.
  std::vector<std::uint8_t> cell_mask;
};

/// Quadrature degree shared by state, adjoint, energy and derivative, so the
/// derivative is exact for the discrete functional.
inline constexpr int kFlowQuadratureDegree = 4;

/// Stationary Navier-Stokes by Newton's method from a Stokes solve (or from
/// `initial_guess` on the same topology). No-slip on walls and obstacle,
/// do-nothing outflow.
FlowSolution solve_state(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution* initial_guess = nullptr);

/// (nu/2) int |Dv|^2.
double energy(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state);

/// Transposed Newton system at the state with right-hand side -nu int Dv:Dphi.
FlowSolution solve_adjoint(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state);

/// Volumetric derivative of the discrete Lagrangian with respect to vertex
/// displacements. With `restrict_to_obstacle` only cells with a vertex on the
/// obstacle are integrated and only the entries at obstacle vertices are
/// kept, so the result acts on the boundary values of a direction.
ShapeGradient shape_derivative(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state,
                               const FlowSolution& adjoint, bool restrict_to_obstacle = true);

/// Newton matrix of the weak residual at a state, without boundary
/// conditions. Unknowns are ordered velocity dofs, then pressure dofs.
SparseMatrix navier_stokes_jacobian(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state);
/// The operator solved by solve_adjoint, before boundary elimination.
SparseMatrix adjoint_operator(const TriMesh& mesh, const FlowConfig& cfg, const FlowSolution& state);

/// Dirichlet velocity values at every P2 dof (zero away from the inflow).
Vector dirichlet_velocity(const TriMesh& mesh, const FlowConfig& cfg);

/// Vertex values of velocity, pressure and, if given, the adjoint pair.
std::vector<VtkField> flow_fields(const TriMesh& mesh, const FlowSolution& state,
                                  const FlowSolution* adjoint = nullptr);

}  // namespace shapeopt
