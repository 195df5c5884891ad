#include "shapeopt/kernels.hpp"

#include <Eigen/SVD>

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace shapeopt::kernels {
namespace {

bool env_forces_scalar() {
  const char* v = std::getenv("SHAPEOPT_FORCE_SCALAR");
  return v != nullptr && std::strcmp(v, "") != 0 && std::strcmp(v, "0") != 0;
}

std::atomic<bool> g_force_scalar{env_forces_scalar()};

bool use_avx2() { return !g_force_scalar.load(std::memory_order_relaxed) && avx2_supported(); }

}  // namespace

bool avx2_supported() {
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported;
}

void force_scalar(bool on) { g_force_scalar = on; }

Backend active_backend() { return use_avx2() ? Backend::Avx2 : Backend::Scalar; }

void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm) {
  use_avx2() ? avx2::project_ball(qt, q, sigma, norm) : scalar::project_ball(qt, q, sigma, norm);
}

double max_norm(std::span<const double> t, TensorNorm norm) {
  return use_avx2() ? avx2::max_norm(t, norm) : scalar::max_norm(t, norm);
}

double weighted_squared_norm(std::span<const double> t, std::span<const double> w) {
  return use_avx2() ? avx2::weighted_squared_norm(t, w) : scalar::weighted_squared_norm(t, w);
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  use_avx2() ? avx2::add(a, b, out) : scalar::add(a, b, out);
}

void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau) {
  use_avx2() ? avx2::multiplier_update(lambda, a, b, tau) : scalar::multiplier_update(lambda, a, b, tau);
}

void clip_singular_values(std::span<const double> qt, std::span<double> q, double sigma) {
  for (std::size_t c = 0; c < qt.size() / 4; ++c) {
    const double* in = qt.data() + 4 * c;
    double* out = q.data() + 4 * c;
    if (spectral_norm(in) <= sigma) {
      std::copy(in, in + 4, out);
      continue;
    }
    Eigen::Matrix2d m;
    m << in[0], in[1], in[2], in[3];
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector2d s = svd.singularValues().cwiseMin(sigma);
    Eigen::Matrix2d r = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    const double rescaled[4] = {r(0, 0), r(0, 1), r(1, 0), r(1, 1)};
    std::copy(rescaled, rescaled + 4, out);
    // SVD round-off can land a hair above sigma
    double factor = 1.0;
    while (spectral_norm(out) > sigma) {
      factor = std::nextafter(factor, 0.0);
      for (int i = 0; i < 4; ++i) out[i] = rescaled[i] * factor;
    }
  }
}

}  // namespace shapeopt::kernels
