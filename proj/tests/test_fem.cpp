#include "doctest.h"

#include "shapeopt/errors.hpp"
#include "shapeopt/linear_solver.hpp"
#include "shapeopt/quadrature.hpp"
#include "shapeopt/space.hpp"
#include "shapeopt/sparse.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace shapeopt;

namespace {

TriMesh unit_square() {
  return structured_rectangle_mesh({0, 1, 0, 1}, 1, 1, Marker::Inflow, Marker::Outflow, Marker::Wall, Marker::Wall);
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST_CASE("triangle rules integrate monomials exactly up to their degree") {
  // int_{ref} x^a y^b = a! b! / (a + b + 2)!
  for (int degree = 1; degree <= 6; ++degree) {
    const auto& rule = triangle_rule(degree);
    double wsum = 0;
    for (const auto& q : rule) {
      wsum += q.weight;
      CHECK(q.weight > 0.0);
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
    for (int a = 0; a <= degree; ++a) {
      for (int b = 0; a + b <= degree; ++b) {
        double integral = 0;
        for (const auto& q : rule) integral += 0.5 * q.weight * std::pow(q.bary[1], a) * std::pow(q.bary[2], b);
        const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        CHECK(integral == doctest::Approx(exact).epsilon(1e-14));
      }
    }
  }
  CHECK_THROWS_AS(triangle_rule(7), InputError);
}

TEST_CASE("space dof counts and Dirichlet sets") {
  const TriMesh sq = unit_square();
  REQUIRE(sq.num_vertices() == 4);
  REQUIRE(sq.num_edges() == 5);
  CHECK(build_space(sq, SpaceKind::P1Vector).num_dofs() == 8);
  CHECK(build_space(sq, SpaceKind::P2Vector).num_dofs() == 18);
  CHECK(build_space(sq, SpaceKind::P1Scalar).num_dofs() == 4);
  CHECK(build_space(sq, SpaceKind::P0Tensor).num_dofs() == 8);

  const TriMesh channel = generate_channel_mesh({-2, 2, -1, 1}, {-0.5, 0.5, -0.5, 0.5}, 8);
  const Space vh = build_space(channel, SpaceKind::P1Vector, {Marker::Inflow, Marker::Outflow, Marker::Wall});
  for (int v = 0; v < channel.num_vertices(); ++v) {
    CHECK(vh.is_dirichlet(2 * v) == channel.vertex_on_outer(v));
    if (channel.vertex_on(v, Marker::Obstacle)) CHECK_FALSE(vh.is_dirichlet(2 * v + 1));
  }
  const Space p2 = build_space(channel, SpaceKind::P2Vector, {Marker::Obstacle});
  int constrained = 0;
  for (int d = 0; d < p2.num_dofs(); ++d) constrained += p2.is_dirichlet(d);
  CHECK(constrained == 2 * (8 + 8));  // 8 vertices and 8 edge midpoints

  CHECK_THROWS_AS(build_space(sq, SpaceKind::P1Vector, std::vector<std::string>{"roof"}), InputError);
}

TEST_CASE("P1 kernels") {
  const TriMesh sq = unit_square();
  const SparseMatrix M = assemble(Kernel::P1Mass, sq);
  CHECK(Eigen::MatrixXd(M).sum() == doctest::Approx(1.0).epsilon(1e-13));

  const TriMesh grid = structured_rectangle_mesh({0, 1, 0, 1}, 4, 4, Marker::Wall, Marker::Wall, Marker::Wall,
                                                 Marker::Wall);
  const SparseMatrix K = assemble(Kernel::P1Stiffness, grid);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid.num_vertices());
  CHECK((K * ones).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((Eigen::MatrixXd(K) - Eigen::MatrixXd(K).transpose()).cwiseAbs().maxCoeff() <= 1e-13);

  // u(x) = x clamped on the boundary: the discrete Laplacian of an affine
  // field has zero residual at every interior node.
  const SparseMatrix L = assemble(Kernel::P1VectorLaplacian, grid);
  Eigen::VectorXd u(2 * grid.num_vertices());
  for (int v = 0; v < grid.num_vertices(); ++v) u.segment<2>(2 * v) = grid.vertices()[v];
  const Eigen::VectorXd r = L * u;
  for (int v = 0; v < grid.num_vertices(); ++v) {
    if (grid.vertex_markers(v) == 0) CHECK(r.segment<2>(2 * v).norm() < 1e-13);
  }
  // Two-cell square by hand: int grad(x) : grad(phi_a e_k) = int d_k phi_a
  // for each vertex a, which equals (outward normal share) of that vertex.
  const SparseMatrix L2 = assemble(Kernel::P1VectorLaplacian, sq);
  Eigen::VectorXd usq(8);
  for (int v = 0; v < 4; ++v) usq.segment<2>(2 * v) = sq.vertices()[v];
  const Eigen::VectorXd rsq = L2 * usq;
  // vertex (0,0): int d_x phi = -1/2, int d_y phi = -1/2; (1,1): +1/2, +1/2
  CHECK(rsq[0] == doctest::Approx(-0.5));
  CHECK(rsq[1] == doctest::Approx(-0.5));
  CHECK(rsq[6] == doctest::Approx(0.5));
  CHECK(rsq[7] == doctest::Approx(0.5));
}

TEST_CASE("direct and Krylov solves") {
  SUBCASE("identity") {
    SparseMatrix I(5, 5);
    I.setIdentity();
    Eigen::VectorXd b(5);
    b << 1, -2, 3, 0.5, 7;
    CHECK((linear_solve(I, b) - b).norm() == 0.0);
  }
  SUBCASE("1D Poisson against the closed-form parabola") {
    // -u'' = 1 on (0,1), u(0)=u(1)=0, h = 1/6: the tridiagonal system with
    // b = h^2 reproduces x(1-x)/2 at the nodes exactly.
    const int n = 5;
    const double h = 1.0 / 6.0;
    MatrixAssembler asmb(n, n);
    for (int i = 0; i < n; ++i) {
      asmb.add(i, i, 2.0);
      if (i > 0) asmb.add(i, i - 1, -1.0);
      if (i + 1 < n) asmb.add(i, i + 1, -1.0);
    }
    const SparseMatrix A = asmb.finish();
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(n, h * h);
    const Eigen::VectorXd x = linear_solve(A, b);
    const Eigen::VectorXd y = linear_solve(A, b, SolverMethod::Krylov);
    for (int i = 0; i < n; ++i) {
      const double xi = (i + 1) * h;
      CHECK(x[i] == doctest::Approx(0.5 * xi * (1 - xi)).epsilon(1e-12));
      CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-8));
    }
  }
  SUBCASE("zero row is reported as singular") {
    MatrixAssembler asmb(3, 3);
    asmb.add(0, 0, 1.0);
    asmb.add(1, 1, 2.0);
    asmb.add(2, 0, 0.0);
    CHECK_THROWS_AS(linear_solve(asmb.finish(), Eigen::VectorXd::Ones(3)), SolverError);
  }
  SUBCASE("direct and Krylov agree on an SPD Dirichlet problem") {
    const TriMesh grid = structured_rectangle_mesh({0, 1, 0, 1}, 20, 20, Marker::Wall, Marker::Wall, Marker::Wall,
                                                   Marker::Wall);
    SparseMatrix K = assemble(Kernel::P1Stiffness, grid);
    const Space space = build_space(grid, SpaceKind::P1Scalar, {Marker::Wall});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1, 1);
    Eigen::VectorXd b(grid.num_vertices());
    for (auto& v : b) v = dist(rng);
    apply_dirichlet(K, b, space.dirichlet_mask());
    const Eigen::VectorXd xd = linear_solve(K, b);
    const Eigen::VectorXd xk = linear_solve(K, b, SolverMethod::Krylov);
    CHECK((xd - xk).norm() <= 1e-8 * xd.norm());
  }
  SUBCASE("Krylov budget exhaustion carries its history") {
    const TriMesh grid = structured_rectangle_mesh({0, 1, 0, 1}, 20, 20, Marker::Wall, Marker::Wall, Marker::Wall,
                                                   Marker::Wall);
    SparseMatrix K = assemble(Kernel::P1Stiffness, grid);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(grid.num_vertices());
    apply_dirichlet(K, b, build_space(grid, SpaceKind::P1Scalar, {Marker::Wall}).dirichlet_mask());
    try {
      bicgstab(K, b, 2);
      FAIL("expected nonconvergence");
    } catch (const NonconvergenceError& e) {
      CHECK(e.history().size() >= 2);
    }
  }
}

TEST_CASE("Dirichlet elimination keeps symmetry and moves values to the rhs") {
  const TriMesh grid = structured_rectangle_mesh({0, 1, 0, 1}, 3, 3, Marker::Wall, Marker::Wall, Marker::Wall,
                                                 Marker::Wall);
  SparseMatrix K = assemble(Kernel::P1Stiffness, grid);
  const Space space = build_space(grid, SpaceKind::P1Scalar, {Marker::Wall});
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grid.num_vertices());
  for (int v = 0; v < grid.num_vertices(); ++v) g[v] = grid.vertices()[v].x() + 2 * grid.vertices()[v].y();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(grid.num_vertices());
  apply_dirichlet(K, b, space.dirichlet_mask(), g);
  CHECK((Eigen::MatrixXd(K) - Eigen::MatrixXd(K).transpose()).cwiseAbs().maxCoeff() == 0.0);
  // harmonic affine data is reproduced in the interior
  const Eigen::VectorXd x = linear_solve(K, b);
  CHECK((x - g).cwiseAbs().maxCoeff() < 1e-12);

  std::ostringstream os;
  write_matrix_market(os, K);
  CHECK(os.str().rfind("%%MatrixMarket", 0) == 0);
}
