#include <atomic>
#include <cstdlib>
#include <string>

#include "sftgen/common/error.hpp"
#include "sftgen/kernels/dot.hpp"

namespace sftgen::kernels {

namespace {

using DotFn = double (*)(const float*, const float*, std::size_t);

DotFn fn_for(Isa isa) {
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2:
        return &avx2::dot;
#endif
#if defined(__aarch64__)
    case Isa::neon:
        return &neon::dot;
#endif
    default:
        return &scalar::dot;
    }
}

Isa best_isa() {
    if (const char* env = std::getenv("SFTGEN_ISA")) {
        const std::string name = env;
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
            if (name == isa_name(isa) && isa_supported(isa)) return isa;
        }
    }
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

struct Dispatch {
    std::atomic<Isa> isa;
    std::atomic<DotFn> dot;
    Dispatch() : isa(best_isa()), dot(fn_for(isa.load())) {}
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
    case Isa::avx2:
        return "avx2";
    case Isa::neon:
        return "neon";
    default:
        return "scalar";
    }
}

bool isa_supported(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Isa active_isa() { return dispatch().isa.load(); }

void set_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw ValidationError("instruction set not supported here: " + std::string(isa_name(isa)));
    }
    dispatch().isa = isa;
    dispatch().dot = fn_for(isa);
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ValidationError("dot: dimension mismatch");
    return dispatch().dot.load()(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const float> a) { return dispatch().dot.load()(a.data(), a.data(), a.size()); }

void dot_rows(std::span<const float> query, std::span<const float> matrix, std::size_t dim,
              std::span<double> out) {
    if (query.size() != dim || matrix.size() != dim * out.size()) {
        throw ValidationError("dot_rows: shape mismatch");
    }
    const DotFn fn = dispatch().dot.load();
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = fn(query.data(), matrix.data() + r * dim, dim);
}

}  // namespace sftgen::kernels
