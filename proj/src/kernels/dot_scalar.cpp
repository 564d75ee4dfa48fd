#include "sftgen/kernels/dot.hpp"

namespace sftgen::kernels::scalar {

double dot(const float* a, const float* b, std::size_t n) {
    double p[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t j = 0; j < 8; ++j) {
            p[j] += static_cast<double>(a[i + j]) * static_cast<double>(b[i + j]);
        }
    }
    const double l0 = p[0] + p[4];
    const double l1 = p[1] + p[5];
    const double l2 = p[2] + p[6];
    const double l3 = p[3] + p[7];
    double sum = (l0 + l2) + (l1 + l3);
    for (; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

}  // namespace sftgen::kernels::scalar
