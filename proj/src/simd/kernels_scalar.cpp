#include <cmath>

#include "senserate/simd/kernels.hpp"

namespace senserate::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

PairMoments moments_scalar(const double* a, const double* b, std::size_t n) {
  PairMoments m;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    m.dot += a[i] * b[i];
    m.norm_a_sq += a[i] * a[i];
    m.norm_b_sq += b[i] * b[i];
    m.dist_sq += d * d;
    m.dist_l1 += std::abs(d);
  }
  return m;
}

constexpr KernelTable kScalar{"scalar", &dot_scalar, &moments_scalar};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace senserate::simd
