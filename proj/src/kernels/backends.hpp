#pragma once

#include "asyncfl/kernels.hpp"

namespace asyncfl::kernels::detail {

extern const KernelTable scalar_table;

#if defined(ASYNCFL_BUILD_AVX2)
extern const KernelTable avx2_table;
#endif

#if defined(ASYNCFL_BUILD_NEON)
extern const KernelTable neon_table;
#endif

} // namespace asyncfl::kernels::detail
