#include "shapeopt/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

namespace shapeopt::kernels::avx2 {
namespace {

// Loads four cells and transposes so that each register holds one tensor
// entry for four consecutive cells.
struct Block {
  __m256d a, b, c, d;
};

inline Block load_block(const double* p) {
  const __m256d r0 = _mm256_loadu_pd(p);
  const __m256d r1 = _mm256_loadu_pd(p + 4);
  const __m256d r2 = _mm256_loadu_pd(p + 8);
  const __m256d r3 = _mm256_loadu_pd(p + 12);
  const __m256d t0 = _mm256_unpacklo_pd(r0, r1);
  const __m256d t1 = _mm256_unpackhi_pd(r0, r1);
  const __m256d t2 = _mm256_unpacklo_pd(r2, r3);
  const __m256d t3 = _mm256_unpackhi_pd(r2, r3);
  return {_mm256_permute2f128_pd(t0, t2, 0x20), _mm256_permute2f128_pd(t1, t3, 0x20),
          _mm256_permute2f128_pd(t0, t2, 0x31), _mm256_permute2f128_pd(t1, t3, 0x31)};
}

inline __m256d squared_frobenius(const Block& x) {
  __m256d s = _mm256_add_pd(_mm256_mul_pd(x.a, x.a), _mm256_mul_pd(x.b, x.b));
  s = _mm256_add_pd(s, _mm256_mul_pd(x.c, x.c));
  return _mm256_add_pd(s, _mm256_mul_pd(x.d, x.d));
}

inline __m256d norm4(const Block& x, TensorNorm norm) {
  if (norm == TensorNorm::Frobenius) return _mm256_sqrt_pd(squared_frobenius(x));
  const __m256d s = _mm256_add_pd(x.a, x.d), r = _mm256_sub_pd(x.b, x.c);
  const __m256d m = _mm256_sub_pd(x.a, x.d), n = _mm256_add_pd(x.b, x.c);
  const __m256d h1 = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(s, s), _mm256_mul_pd(r, r)));
  const __m256d h2 = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(m, m), _mm256_mul_pd(n, n)));
  return _mm256_mul_pd(_mm256_set1_pd(0.5), _mm256_add_pd(h1, h2));
}

}  // namespace

void project_ball(std::span<const double> qt, std::span<double> q, double sigma, TensorNorm norm) {
  const std::size_t cells = qt.size() / 4;
  const std::size_t blocks = cells / 4;
  const __m256d vs = _mm256_set1_pd(sigma);
  const __m256d one = _mm256_set1_pd(1.0);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const double* in = qt.data() + 16 * blk;
    double* out = q.data() + 16 * blk;
    const __m256d n = norm4(load_block(in), norm);
    const __m256d over = _mm256_cmp_pd(n, vs, _CMP_GT_OQ);
    const __m256d factor = _mm256_blendv_pd(one, _mm256_div_pd(vs, n), over);
    alignas(32) double f[4];
    _mm256_store_pd(f, factor);
    const int mask = _mm256_movemask_pd(over);
    for (int l = 0; l < 4; ++l) {
      const __m256d row = _mm256_loadu_pd(in + 4 * l);
      _mm256_storeu_pd(out + 4 * l, (mask >> l) & 1 ? _mm256_mul_pd(row, _mm256_set1_pd(f[l])) : row);
      if ((mask >> l) & 1) enforce_bound(in + 4 * l, out + 4 * l, f[l], sigma, norm);
    }
  }
  scalar::project_ball(qt.subspan(16 * blocks), q.subspan(16 * blocks), sigma, norm);
}

double max_norm(std::span<const double> t, TensorNorm norm) {
  const std::size_t cells = t.size() / 4;
  const std::size_t blocks = cells / 4;
  __m256d m = _mm256_setzero_pd();
  for (std::size_t blk = 0; blk < blocks; ++blk) m = _mm256_max_pd(m, norm4(load_block(t.data() + 16 * blk), norm));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  const double tail = scalar::max_norm(t.subspan(16 * blocks), norm);
  return std::max({lanes[0], lanes[1], lanes[2], lanes[3], tail});
}

double weighted_squared_norm(std::span<const double> t, std::span<const double> w) {
  const std::size_t cells = w.size();
  const std::size_t blocks = cells / 4;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const __m256d sq = squared_frobenius(load_block(t.data() + 16 * blk));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w.data() + 4 * blk), sq));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  const double tail = scalar::weighted_squared_norm(t.subspan(16 * blocks), w.subspan(4 * blocks));
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::size_t n = a.size() / 4 * 4;
  for (std::size_t i = 0; i < n; i += 4) {
    _mm256_storeu_pd(out.data() + i, _mm256_add_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  }
  scalar::add(a.subspan(n), b.subspan(n), out.subspan(n));
}

void multiplier_update(std::span<double> lambda, std::span<const double> a, std::span<const double> b, double tau) {
  const std::size_t n = lambda.size() / 4 * 4;
  const __m256d vt = _mm256_set1_pd(tau);
  for (std::size_t i = 0; i < n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    _mm256_storeu_pd(lambda.data() + i, _mm256_add_pd(_mm256_loadu_pd(lambda.data() + i), _mm256_mul_pd(vt, d)));
  }
  scalar::multiplier_update(lambda.subspan(n), a.subspan(n), b.subspan(n), tau);
}

}  // namespace shapeopt::kernels::avx2
