#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shapeopt {

/// Malformed or out-of-contract input (bad extents, unknown marker, size mismatch).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Geometric preconditions violated, e.g. an obstacle touching the tunnel walls.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A deformation turned a cell inside out.
class InversionError : public std::runtime_error {
 public:
  InversionError(int cell, double det)
      : std::runtime_error("cell " + std::to_string(cell) +
                           " inverted, det(I+Du) = " + std::to_string(det)),
        cell_(cell),
        det_(det) {}

  int cell() const { return cell_; }
  double det() const { return det_; }

 private:
  int cell_;
  double det_;
};

/// Linear solver breakdown (singular factorization, failed residual check).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative method ran out of iterations; carries the residual trace.
class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}

  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace shapeopt
