#pragma once

#include <array>
#include <vector>

namespace shapeopt {

/// Quadrature point in barycentric coordinates; weights sum to one, so an
/// integral over a cell is |T| * sum(w_q f(x_q)).
struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;
};

/// Symmetric triangle rules with positive weights, exact for polynomials of
/// total degree <= `degree` (1..6).
const std::vector<QuadraturePoint>& triangle_rule(int degree);

}  // namespace shapeopt
