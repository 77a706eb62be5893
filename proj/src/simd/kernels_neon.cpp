#include <arm_neon.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace senserate::simd::detail {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

PairMoments moments_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t dot = vdupq_n_f64(0.0);
  float64x2_t na = vdupq_n_f64(0.0);
  float64x2_t nb = vdupq_n_f64(0.0);
  float64x2_t d2 = vdupq_n_f64(0.0);
  float64x2_t l1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vb = vld1q_f64(b + i);
    const float64x2_t diff = vsubq_f64(va, vb);
    dot = vfmaq_f64(dot, va, vb);
    na = vfmaq_f64(na, va, va);
    nb = vfmaq_f64(nb, vb, vb);
    d2 = vfmaq_f64(d2, diff, diff);
    l1 = vaddq_f64(l1, vabsq_f64(diff));
  }
  PairMoments m{vaddvq_f64(dot), vaddvq_f64(na), vaddvq_f64(nb), vaddvq_f64(d2), vaddvq_f64(l1)};
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

constexpr KernelTable kNeon{"neon", &dot_neon, &moments_neon};

}  // namespace

const KernelTable& neon_table() noexcept { return kNeon; }

}  // namespace senserate::simd::detail
