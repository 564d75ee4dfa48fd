// Compiled with -mavx2 (see src/CMakeLists.txt). Only reached after a
// runtime CPU check.
#include "sftgen/kernels/dot.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace sftgen::kernels::avx2 {

double dot(const float* a, const float* b, std::size_t n) {
    __m256d acc_lo = _mm256_setzero_pd();  // partials 0..3
    __m256d acc_hi = _mm256_setzero_pd();  // partials 4..7
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d a0 = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        const __m256d b0 = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        const __m256d a1 = _mm256_cvtps_pd(_mm_loadu_ps(a + i + 4));
        const __m256d b1 = _mm256_cvtps_pd(_mm_loadu_ps(b + i + 4));
        acc_lo = _mm256_add_pd(acc_lo, _mm256_mul_pd(a0, b0));
        acc_hi = _mm256_add_pd(acc_hi, _mm256_mul_pd(a1, b1));
    }
    // lanes: p0+p4, p1+p5, p2+p6, p3+p7
    const __m256d lanes = _mm256_add_pd(acc_lo, acc_hi);
    // (l0+l2, l1+l3)
    const __m128d half = _mm_add_pd(_mm256_castpd256_pd128(lanes), _mm256_extractf128_pd(lanes, 1));
    double sum = _mm_cvtsd_f64(half) + _mm_cvtsd_f64(_mm_unpackhi_pd(half, half));
    for (; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

}  // namespace sftgen::kernels::avx2
#endif
