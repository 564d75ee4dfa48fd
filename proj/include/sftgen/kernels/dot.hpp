#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace sftgen::kernels {

/// Instruction-set variant used by the dense kernels.
enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

/// Variant selected at startup: the best supported one, unless the
/// SFTGEN_ISA environment variable names another supported variant.
Isa active_isa();

/// Overrides the active variant (tests, benchmarks). Throws ValidationError
/// if the CPU or build does not support it.
void set_isa(Isa isa);

// Float inputs, double accumulation. Every variant sums in the same order:
// eight running partial sums over blocks of eight elements, reduced as
// ((p0+p4)+(p2+p6)) + ((p1+p5)+(p3+p7)), then the tail added left to
// right. Products of two floats are exact in double, so all variants return
// bit-identical results.

double dot(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);

/// out[r] = dot(query, matrix[r*dim .. r*dim+dim)) for every row.
void dot_rows(std::span<const float> query, std::span<const float> matrix, std::size_t dim,
              std::span<double> out);

/// Per-variant entry points, exposed for equivalence tests.
namespace scalar {
double dot(const float* a, const float* b, std::size_t n);
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const float* a, const float* b, std::size_t n);
}
#endif
#if defined(__aarch64__)
namespace neon {
double dot(const float* a, const float* b, std::size_t n);
}
#endif

}  // namespace sftgen::kernels
