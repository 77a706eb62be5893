#pragma once

// Embedding similarity kernels: a scalar reference plus vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64) picked once at runtime.
//
// Set SENSERATE_SIMD=scalar|avx2|neon to pin a variant; unavailable choices
// fall back to scalar.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace senserate::simd {

/// Sums gathered in one pass over a pair of vectors.
struct PairMoments {
  double dot = 0.0;
  double norm_a_sq = 0.0;
  double norm_b_sq = 0.0;
  double dist_sq = 0.0;
  double dist_l1 = 0.0;
};

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  PairMoments (*moments)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// The variant used by the span helpers below.
const KernelTable& active_kernels();

double dot(std::span<const double> a, std::span<const double> b);
PairMoments moments(std::span<const double> a, std::span<const double> b);

}  // namespace senserate::simd
