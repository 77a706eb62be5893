#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace senserate::simd {

const KernelTable* avx2_kernels() noexcept {
#if defined(SENSERATE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() noexcept {
#if defined(SENSERATE_HAVE_NEON)
  return &detail::neon_table();  // NEON is mandatory on AArch64.
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (auto* k = avx2_kernels()) out.push_back(k);
  if (auto* k = neon_kernels()) out.push_back(k);
  return out;
}

namespace {

const KernelTable& select() {
  const char* env = std::getenv("SENSERATE_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return scalar_kernels();
  if (want == "avx2") return avx2_kernels() ? *avx2_kernels() : scalar_kernels();
  if (want == "neon") return neon_kernels() ? *neon_kernels() : scalar_kernels();
  if (auto* k = avx2_kernels()) return *k;
  if (auto* k = neon_kernels()) return *k;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& chosen = select();
  return chosen;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active_kernels().dot(a.data(), b.data(), a.size());
}

PairMoments moments(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("moments: length mismatch");
  return active_kernels().moments(a.data(), b.data(), a.size());
}

}  // namespace senserate::simd
