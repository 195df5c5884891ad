#include "doctest.h"

#include "shapeopt/constraints.hpp"
#include "shapeopt/p1.hpp"

#include <random>

using namespace shapeopt;

namespace {

TriMesh channel_16(int res = 16) { return generate_channel_mesh({-7, 7, -3, 3}, {-0.5, 0.5, -0.5, 0.5}, res); }

// smooth interior field vanishing on the outer boundary, det(I + Du) > 0
Vector bump_field(const TriMesh& mesh, double amp, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  const double a = d(rng), b = d(rng), c = d(rng), e = d(rng);
  Vector u(2 * mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Vec2 x = mesh.vertices()[v];
    const double w = std::cos(M_PI * x.x() / 14) * std::cos(M_PI * x.y() / 6);
    u[2 * v] = amp * w * (a + b * x.y());
    u[2 * v + 1] = amp * w * (c + e * x.x() * 0.2);
  }
  zero_constrained(u, outer_boundary_mask(mesh));
  return u;
}

}  // namespace

TEST_CASE("closed-form constraint values") {
  const GeometricConstraints g(channel_16());
  const TriMesh& mesh = g.mesh();
  REQUIRE(g.area() == doctest::Approx(83.0).epsilon(1e-13));
  CHECK(g.diameter() == doctest::Approx(std::hypot(14.0, 6.0)).epsilon(1e-14));

  SUBCASE("zero deformation") {
    const Vector3 v = g.eval(Vector::Zero(2 * mesh.num_vertices()));
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
    CHECK(v[2] == 0.0);
  }
  SUBCASE("uniform dilation") {
    const double alpha = 1.1;
    Vector u(2 * mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) u.segment<2>(2 * v) = (alpha - 1) * mesh.vertices()[v];
    const Vector3 v = g.eval(u);
    CHECK(v[2] == doctest::Approx(17.43).epsilon(1e-12));
    // the domain is symmetric about the origin, so its barycenter stays put
    CHECK(std::abs(v[0]) < 1e-12);
    CHECK(std::abs(v[1]) < 1e-12);
  }
  SUBCASE("translation") {
    Vector u(2 * mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) u.segment<2>(2 * v) = Vec2(0.01, 0.0);
    const Vector3 v = g.eval(u);
    CHECK(v[0] == doctest::Approx(0.83).epsilon(1e-12));
    CHECK(std::abs(v[1]) < 1e-13);
    CHECK(std::abs(v[2]) < 1e-13);
  }
}

TEST_CASE("gradient") {
  const GeometricConstraints g(channel_16());
  const TriMesh& mesh = g.mesh();
  const auto outer = outer_boundary_mask(mesh);
  const int n = 2 * mesh.num_vertices();

  SUBCASE("at u = 0 the volume derivative is the divergence") {
    const Eigen::MatrixXd B = g.gradient(Vector::Zero(n));
    const Vector w = bump_field(mesh, 0.3, 4);
    const auto Dw = p1_gradients(mesh, w);
    const auto areas = cell_areas(mesh);
    double div = 0;
    for (int c = 0; c < mesh.num_cells(); ++c) div += areas[c] * (Dw[4 * c] + Dw[4 * c + 3]);
    CHECK(B.col(2).dot(w) == doctest::Approx(div).epsilon(1e-12));
    for (int i = 0; i < n; ++i) {
      if (outer[i]) CHECK(B.row(i).norm() == 0.0);
    }
  }
  SUBCASE("translation derivative of the barycenter is the deformed area") {
    const Vector u = bump_field(mesh, 0.05, 9);
    Vector e1 = Vector::Zero(n);
    for (int v = 0; v < mesh.num_vertices(); ++v) e1[2 * v] = 1.0;
    const double t = 1e-4;
    // g_0 is quadratic in a uniform shift, so the central difference is exact
    const double fd = (g.eval(u + t * e1)[0] - g.eval(u - t * e1)[0]) / (2 * t);
    const auto dets = deformation_determinants(mesh, u);
    const auto areas = cell_areas(mesh);
    double deformed = 0;
    for (int c = 0; c < mesh.num_cells(); ++c) deformed += areas[c] * dets[c];
    CHECK(fd == doctest::Approx(deformed).epsilon(1e-9));
  }
  SUBCASE("central differences for random pairs") {
    const double t = 1e-6;
    for (unsigned k = 0; k < 5; ++k) {
      const Vector u = bump_field(mesh, 0.08, 20 + k);
      const Vector w = bump_field(mesh, 1.0, 40 + k);
      const Eigen::Vector3d fd = (g.eval(u + t * w) - g.eval(u - t * w)) / (2 * t);
      const Eigen::Vector3d an = g.gradient(u).transpose() * w;
      for (int i = 0; i < 3; ++i) CHECK(an[i] == doctest::Approx(fd[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("hessian") {
  const GeometricConstraints g(channel_16());
  const TriMesh& mesh = g.mesh();
  const int n = 2 * mesh.num_vertices();
  const Vector u = bump_field(mesh, 0.08, 3);

  CHECK(Eigen::MatrixXd(g.hessian(u, Vector3::Zero())).cwiseAbs().maxCoeff() == 0.0);

  const Vector3 mu(0.7, -1.3, 0.4);
  const SparseMatrix H = g.hessian(u, mu);
  REQUIRE(H.rows() == n);
  const SparseMatrix Ht = H.transpose();
  const SparseMatrix asym = H - Ht;
  CHECK(asym.coeffs().cwiseAbs().maxCoeff() <= 1e-13);

  const double t = 1e-6;
  for (unsigned k = 0; k < 5; ++k) {
    const Vector w = bump_field(mesh, 1.0, 60 + k);
    const Vector z = bump_field(mesh, 1.0, 80 + k);
    const Eigen::MatrixXd dB = (g.gradient(u + t * z) - g.gradient(u - t * z)) / (2 * t);
    const double fd = w.dot(dB * mu);
    CHECK(w.dot(H * z) == doctest::Approx(fd).epsilon(1e-6));
  }
}
