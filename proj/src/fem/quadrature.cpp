#include "shapeopt/quadrature.hpp"

#include "shapeopt/errors.hpp"

#include <string>

namespace shapeopt {

namespace {

void add_orbit3(std::vector<QuadraturePoint>& rule, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  rule.push_back({{b, a, a}, w});
  rule.push_back({{a, b, a}, w});
  rule.push_back({{a, a, b}, w});
}

void add_orbit6(std::vector<QuadraturePoint>& rule, double a, double b, double w) {
  const double c = 1.0 - a - b;
  rule.push_back({{a, b, c}, w});
  rule.push_back({{a, c, b}, w});
  rule.push_back({{b, a, c}, w});
  rule.push_back({{b, c, a}, w});
  rule.push_back({{c, a, b}, w});
  rule.push_back({{c, b, a}, w});
}

// Dunavant rules; degree 3 reuses the positive six-point degree-4 rule.
std::vector<std::vector<QuadraturePoint>> make_rules() {
  std::vector<std::vector<QuadraturePoint>> rules(7);
  rules[1] = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0}};
  add_orbit3(rules[2], 1.0 / 6, 1.0 / 3);
  add_orbit3(rules[4], 0.44594849091596488632, 0.22338158967801146570);
  add_orbit3(rules[4], 0.091576213509770743460, 0.10995174365532186764);
  rules[3] = rules[4];
  rules[5] = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.225}};
  add_orbit3(rules[5], 0.47014206410511508977, 0.13239415278850618074);
  add_orbit3(rules[5], 0.10128650732345633880, 0.12593918054482715260);
  add_orbit3(rules[6], 0.24928674517091042129, 0.11678627572637936603);
  add_orbit3(rules[6], 0.063089014491502228340, 0.050844906370206816921);
  add_orbit6(rules[6], 0.053145049844816947353, 0.31035245103378440542, 0.082851075618373575194);
  return rules;
}

}  // namespace

const std::vector<QuadraturePoint>& triangle_rule(int degree) {
  static const auto rules = make_rules();
  if (degree < 1 || degree > 6) throw InputError("no triangle rule of degree " + std::to_string(degree));
  return rules[degree];
}

}  // namespace shapeopt
