#pragma once

#include "senserate/simd/kernels.hpp"

namespace senserate::simd::detail {

#if defined(SENSERATE_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(SENSERATE_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif

}  // namespace senserate::simd::detail
