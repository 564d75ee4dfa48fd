#include "sftgen/kernels/dot.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace sftgen::kernels::neon {

double dot(const float* a, const float* b, std::size_t n) {
    // Four 2-lane accumulators hold partials {0,1} {2,3} {4,5} {6,7}.
    float64x2_t p01 = vdupq_n_f64(0.0);
    float64x2_t p23 = vdupq_n_f64(0.0);
    float64x2_t p45 = vdupq_n_f64(0.0);
    float64x2_t p67 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const float32x4_t a0 = vld1q_f32(a + i);
        const float32x4_t b0 = vld1q_f32(b + i);
        const float32x4_t a1 = vld1q_f32(a + i + 4);
        const float32x4_t b1 = vld1q_f32(b + i + 4);
        p01 = vaddq_f64(p01, vmulq_f64(vcvt_f64_f32(vget_low_f32(a0)), vcvt_f64_f32(vget_low_f32(b0))));
        p23 = vaddq_f64(p23, vmulq_f64(vcvt_high_f64_f32(a0), vcvt_high_f64_f32(b0)));
        p45 = vaddq_f64(p45, vmulq_f64(vcvt_f64_f32(vget_low_f32(a1)), vcvt_f64_f32(vget_low_f32(b1))));
        p67 = vaddq_f64(p67, vmulq_f64(vcvt_high_f64_f32(a1), vcvt_high_f64_f32(b1)));
    }
    const float64x2_t l01 = vaddq_f64(p01, p45);  // l0, l1
    const float64x2_t l23 = vaddq_f64(p23, p67);  // l2, l3
    const float64x2_t half = vaddq_f64(l01, l23);  // l0+l2, l1+l3
    double sum = vgetq_lane_f64(half, 0) + vgetq_lane_f64(half, 1);
    for (; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

}  // namespace sftgen::kernels::neon
#endif
