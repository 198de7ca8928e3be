#pragma once

#include "benign/kernels.hpp"

namespace benign::kernels::detail {

const Table& scalar_table();
#if defined(BENIGN_HAVE_AVX2)
const Table& avx2_table();
#endif
#if defined(BENIGN_HAVE_NEON)
const Table& neon_table();
#endif

}  // namespace benign::kernels::detail
