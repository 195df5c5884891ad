#include "doctest.h"

#include "flow_oracles.hpp"
#include "shapeopt/errors.hpp"
#include "shapeopt/flow.hpp"

#include <cmath>
#include <random>

using namespace shapeopt;
using namespace shapeopt::oracles;

TEST_CASE("Poiseuille flow is reproduced exactly") {
  const TriMesh mesh = poiseuille_channel(14, 6);
  FlowConfig cfg;
  cfg.inflow = InflowProfile::Parabolic;
  const FlowSolution s = solve_state(mesh, cfg);
  const auto nodes = p2_node_coordinates(mesh);
  double err = 0, perr = 0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const double y = nodes[n].y() / 3.0;
    err = std::max(err, std::abs(s.velocity[2 * n] - (1 - y * y)));
    err = std::max(err, std::abs(s.velocity[2 * n + 1]));
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    perr = std::max(perr, std::abs(s.pressure[v] - 2 * cfg.nu / 9 * (14 - mesh.vertices()[v].x())));
  }
  CHECK(err < 1e-8);
  CHECK(perr < 1e-8);
  const double J = energy(mesh, cfg, s);
  CHECK(std::abs(J - 56 * cfg.nu / 9) <= 1e-6 * 56 * cfg.nu / 9);
  CHECK(s.newton_iterations <= 1);
}

TEST_CASE("zero inflow gives the zero state, adjoint and derivative") {
  const TriMesh mesh = generate_channel_mesh({-3, 3, -1.5, 1.5}, {-0.5, 0.5, -0.5, 0.5}, 8);
  FlowConfig cfg;
  cfg.inflow = InflowProfile::Zero;
  const FlowSolution s = solve_state(mesh, cfg);
  CHECK(s.velocity.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.pressure.cwiseAbs().maxCoeff() == 0.0);
  CHECK(energy(mesh, cfg, s) == 0.0);
  const FlowSolution a = solve_adjoint(mesh, cfg, s);
  CHECK(a.velocity.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.pressure.cwiseAbs().maxCoeff() == 0.0);
  CHECK(shape_derivative(mesh, cfg, s, a).dual.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("energy of a shear field") {
  const TriMesh sq = structured_rectangle_mesh({0, 1, 0, 1}, 2, 2, Marker::Inflow, Marker::Outflow, Marker::Wall,
                                               Marker::Wall);
  FlowConfig cfg;
  FlowSolution s;
  const auto nodes = p2_node_coordinates(sq);
  s.velocity = Vector::Zero(2 * static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t n = 0; n < nodes.size(); ++n) s.velocity[2 * n] = nodes[n].y();
  s.pressure = Vector::Zero(sq.num_vertices());
  CHECK(energy(sq, cfg, s) == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("manufactured solution converges at the Taylor-Hood rates") {
  FlowConfig cfg;
  cfg.nu = 0.1;
  cfg.inflow = InflowProfile::Zero;
  cfg.forcing = [nu = cfg.nu](const Vec2& x) { return mms_forcing(x, nu); };
  std::vector<Errors> errs;
  for (int n : {4, 8, 16, 32}) {
    const TriMesh mesh = structured_rectangle_mesh({0, 1, 0, 1}, n, n, Marker::Wall, Marker::Wall, Marker::Wall,
                                                   Marker::Wall);
    errs.push_back(l2_errors(mesh, solve_state(mesh, cfg)));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    INFO("level " << i << " velocity " << errs[i].velocity << " pressure " << errs[i].pressure);
    CHECK(errs[i - 1].velocity / errs[i].velocity >= 7.0);
    CHECK(errs[i - 1].pressure / errs[i].pressure >= 3.5);
  }
}

TEST_CASE("state solve on the channel with obstacle") {
  const TriMesh mesh = generate_channel_mesh({-7, 7, -3, 3}, {-0.5, 0.5, -0.5, 0.5}, 32);
  FlowConfig cfg;
  const FlowSolution s = solve_state(mesh, cfg);
  CHECK(s.newton_iterations <= 10);
  CHECK(s.residual_history.back() <= 1e-10 * s.residual_history.front() + 1e-13);
  // Dirichlet data is met exactly
  const Vector bc = dirichlet_velocity(mesh, cfg);
  const Space V = build_space(mesh, SpaceKind::P2Vector, {Marker::Inflow, Marker::Wall, Marker::Obstacle});
  for (int d = 0; d < V.num_dofs(); ++d) {
    if (V.is_dirichlet(d)) CHECK(s.velocity[d] == bc[d]);
  }
  CHECK(bc.maxCoeff() == doctest::Approx(1.0));
  CHECK(bc.minCoeff() >= 0.0);

  SUBCASE("repeat solves are bitwise identical") {
    const FlowSolution t = solve_state(mesh, cfg);
    CHECK((s.velocity - t.velocity).cwiseAbs().maxCoeff() == 0.0);
    CHECK(energy(mesh, cfg, s) == energy(mesh, cfg, t));
  }
  SUBCASE("adjoint operator is the transposed linearization") {
    const SparseMatrix K = navier_stokes_jacobian(mesh, cfg, s);
    const SparseMatrix A = adjoint_operator(mesh, cfg, s);
    CHECK((Eigen::SparseMatrix<double>(A) - Eigen::SparseMatrix<double>(K.transpose())).norm() <= 1e-12);
  }
  SUBCASE("restriction keeps the obstacle entries only") {
    const FlowSolution a = solve_adjoint(mesh, cfg, s);
    const ShapeGradient full = shape_derivative(mesh, cfg, s, a, false);
    const ShapeGradient restricted = shape_derivative(mesh, cfg, s, a, true);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (mesh.vertex_on(v, Marker::Obstacle)) {
        CHECK(restricted.dual[2 * v] == full.dual[2 * v]);
        CHECK(restricted.dual[2 * v + 1] == full.dual[2 * v + 1]);
      }
      else CHECK(restricted.dual.segment<2>(2 * v).norm() == 0.0);
      if (mesh.vertex_on_outer(v)) CHECK(full.dual.segment<2>(2 * v).norm() == 0.0);
    }
    for (int c = 0; c < mesh.num_cells(); ++c) CHECK(restricted.cell_mask[c] == mesh.touches_obstacle(c));
  }
  SUBCASE("warm start from the converged state needs no iteration") {
    const FlowSolution t = solve_state(mesh, cfg, &s);
    CHECK(t.newton_iterations <= 1);
  }
}

TEST_CASE("shape derivative matches finite differences of the energy") {
  const TriMesh mesh = generate_channel_mesh({-7, 7, -3, 3}, {-0.5, 0.5, -0.5, 0.5}, 16);
  FlowConfig cfg;
  cfg.newton_rtol = 1e-14;
  cfg.newton_atol = 1e-14;
  const FlowSolution s = solve_state(mesh, cfg);
  const FlowSolution a = solve_adjoint(mesh, cfg, s);
  const ShapeGradient dJ = shape_derivative(mesh, cfg, s, a, false);

  std::mt19937 rng(11);
  std::normal_distribution<double> normal;
  const double t = 1e-4;
  for (int trial = 0; trial < 3; ++trial) {
    // smooth bump around the obstacle with a random direction per vertex
    Vector u = Vector::Zero(2 * mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (mesh.vertex_on_outer(v)) continue;
      const Vec2& x = mesh.vertices()[v];
      const double d = std::max(std::abs(x.x()), std::abs(x.y())) - 0.5;
      const double bump = std::max(0.0, 1.0 - d / 0.5);
      u[2 * v] = bump * normal(rng);
      u[2 * v + 1] = bump * normal(rng);
    }
    u *= 0.05 / u.cwiseAbs().maxCoeff();
    const TriMesh plus = apply_deformation(mesh, t * u);
    const TriMesh minus = apply_deformation(mesh, -t * u);
    const double Jp = energy(plus, cfg, solve_state(plus, cfg, &s));
    const double Jm = energy(minus, cfg, solve_state(minus, cfg, &s));
    const double fd = (Jp - Jm) / (2 * t);
    const double exact = dJ.dual.dot(u);
    INFO("fd " << fd << " derivative " << exact);
    CHECK(std::abs(fd - exact) <= 1e-4 * std::abs(exact));
  }
}

TEST_CASE("flow fields for output") {
  const TriMesh mesh = poiseuille_channel(2, 2);
  FlowConfig cfg;
  cfg.inflow = InflowProfile::Parabolic;
  const FlowSolution s = solve_state(mesh, cfg);
  const auto fields = flow_fields(mesh, s, &s);
  CHECK(fields.size() == 5);
  for (const auto& f : fields) CHECK(f.values.size() == static_cast<std::size_t>(f.components * mesh.num_vertices()));
  CHECK_THROWS_AS(solve_state(mesh, FlowConfig{.nu = 0.0}), InputError);
}
