#pragma once

#include <cmath>
#include <span>

// Per-cell 2x2 tensor kernels used by the descent loops. The inline helpers
// have internal linkage so the AVX2 translation unit keeps its own copies.
// Tensors are stored
// as four consecutive doubles (row-major) per cell. Every kernel has a scalar
// reference and an AVX2 variant; the active one is picked once at startup.
namespace shapeopt::kernels {

enum class TensorNorm { Spectral, Frobenius };
enum class Backend { Scalar, Avx2 };

static inline double frobenius_norm(const double* t) {
  return std::sqrt(((t[0] * t[0] + t[1] * t[1]) + t[2] * t[2]) + t[3] * t[3]);
}

/// Largest singular value of [[a, b], [c, d]] in closed form.
static inline double spectral_norm(const double* t) {
  const double s = t[0] + t[3], r = t[1] - t[2];
  const double m = t[0] - t[3], n = t[1] + t[2];
  return 0.5 * (std::sqrt(s * s + r * r) + std::sqrt(m * m + n * n));
}

static inline double tensor_norm(const double* t, TensorNorm norm) {
  return norm == TensorNorm::Spectral ? spectral_norm(t) : frobenius_norm(t);
}

/// Rounding in the radial scaling can leave |q| a few ulps above sigma;
/// shrink the factor until the bound holds exactly.
static inline void enforce_bound(const double* qt, double* q, double factor, double sigma, TensorNorm norm) {
  while (tensor_norm(q, norm) > sigma) {
    factor = std::nextafter(factor, 0.0);
    for (int i = 0; i < 4; ++i) q[i] = qt[i] * factor;
  }
}

/// Backend in use. Set SHAPEOPT_FORCE_SCALAR=1 (or call force_scalar) to
/// bypass the SIMD path.
Backend active_backend();
bool avx2_supported();
void force_scalar(bool on);

/// q = qt / max(1, |qt| / sigma) per cell, with |q| <= sigma guaranteed.
void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm);
/// max over cells of |t|.
double max_norm(std::span<const double> t, TensorNorm norm);
/// sum over cells of w_c * |t_c|_F^2.
double weighted_squared_norm(std::span<const double> t, std::span<const double> w);
/// out = a + b, per entry (q-tilde = Du + lambda).
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
/// lambda += tau * (a - b), per entry.
void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau);

namespace scalar {
void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm);
double max_norm(std::span<const double> t, TensorNorm norm);
double weighted_squared_norm(std::span<const double> t, std::span<const double> w);
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau);
}  // namespace scalar

namespace avx2 {
void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm);
double max_norm(std::span<const double> t, TensorNorm norm);
double weighted_squared_norm(std::span<const double> t, std::span<const double> w);
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau);
}  // namespace avx2

/// Exact Euclidean projection for the spectral norm: clip singular values at
/// sigma. Scalar only.
void clip_singular_values(std::span<const double> qt, std::span<double> q, double sigma);

}  // namespace shapeopt::kernels
