// Compiled with -mavx2 -mfma. Only reached after dispatch.cpp has checked
// the CPU flags.

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace senserate::simd::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

PairMoments moments_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d dot = _mm256_setzero_pd();
  __m256d na = _mm256_setzero_pd();
  __m256d nb = _mm256_setzero_pd();
  __m256d d2 = _mm256_setzero_pd();
  __m256d l1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    const __m256d diff = _mm256_sub_pd(va, vb);
    dot = _mm256_fmadd_pd(va, vb, dot);
    na = _mm256_fmadd_pd(va, va, na);
    nb = _mm256_fmadd_pd(vb, vb, nb);
    d2 = _mm256_fmadd_pd(diff, diff, d2);
    l1 = _mm256_add_pd(l1, _mm256_andnot_pd(sign_mask, diff));
  }
  PairMoments m{hsum(dot), hsum(na), hsum(nb), hsum(d2), hsum(l1)};
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    m.dot += a[i] * b[i];
    m.norm_a_sq += a[i] * a[i];
    m.norm_b_sq += b[i] * b[i];
    m.dist_sq += d * d;
    m.dist_l1 += std::abs(d);
  }
  return m;
}

constexpr KernelTable kAvx2{"avx2", &dot_avx2, &moments_avx2};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace senserate::simd::detail
