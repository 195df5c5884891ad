#include "shapeopt/kernels.hpp"

#include <algorithm>

namespace shapeopt::kernels::scalar {

void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm) {
  const std::size_t cells = qt.size() / 4;
  for (std::size_t c = 0; c < cells; ++c) {
    const double* in = qt.data() + 4 * c;
    double* out = q.data() + 4 * c;
    const double n = tensor_norm(in, norm);
    if (n > sigma) {
      const double factor = sigma / n;
      for (int i = 0; i < 4; ++i) out[i] = in[i] * factor;
      enforce_bound(in, out, factor, sigma, norm);
    } else {
      for (int i = 0; i < 4; ++i) out[i] = in[i];
    }
  }
}

double max_norm(std::span<const double> t, TensorNorm norm) {
  double m = 0.0;
  for (std::size_t c = 0; c < t.size() / 4; ++c) m = std::max(m, tensor_norm(t.data() + 4 * c, norm));
  return m;
}

// Four interleaved partial sums, matching the lane layout of the SIMD kernel.
double weighted_squared_norm(std::span<const double> t, std::span<const double> w) {
  const std::size_t cells = w.size();
  const std::size_t blocks = cells / 4;
  double acc[4] = {0, 0, 0, 0};
  for (std::size_t b = 0; b < blocks; ++b) {
    for (int l = 0; l < 4; ++l) {
      const std::size_t c = 4 * b + l;
      const double* x = t.data() + 4 * c;
      const double sq = ((x[0] * x[0] + x[1] * x[1]) + x[2] * x[2]) + x[3] * x[3];
      acc[l] += w[c] * sq;
    }
  }
  double tail = 0.0;
  for (std::size_t c = 4 * blocks; c < cells; ++c) {
    const double* x = t.data() + 4 * c;
    tail += w[c] * (((x[0] * x[0] + x[1] * x[1]) + x[2] * x[2]) + x[3] * x[3]);
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau) {
  for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += tau * (a[i] - b[i]);
}

}  // namespace shapeopt::kernels::scalar
