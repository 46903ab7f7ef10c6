#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "citeverify/simd.hpp"

namespace citeverify::simd {

namespace {

struct KernelTable {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*dot_rows)(const double*, const double*, std::size_t, std::size_t, double*);
};

constexpr KernelTable kScalar{Isa::Scalar, scalar::dot, scalar::axpy, scalar::scale,
                              scalar::dot_rows};
#if defined(CITEVERIFY_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, avx2::dot, avx2::axpy, avx2::scale, avx2::dot_rows};
#endif

bool cpu_has_avx2() {
#if defined(CITEVERIFY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return &kScalar;
        case Isa::Avx2:
#if defined(CITEVERIFY_HAVE_AVX2)
            return cpu_has_avx2() ? &kAvx2 : nullptr;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* detect() {
    if (const char* forced = std::getenv("CITEVERIFY_ISA")) {
        if (std::string(forced) == "scalar") return &kScalar;
    }
    if (const auto* t = table_for(Isa::Avx2)) return t;
    return &kScalar;
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) { return table_for(isa) != nullptr; }

Isa active_isa() { return kernels().isa; }

void set_active_isa(Isa isa) {
    const auto* t = table_for(isa);
    if (t == nullptr) {
        throw std::invalid_argument("kernel variant '" + std::string(to_string(isa)) +
                                    "' is not available on this machine");
    }
    active_table().store(t, std::memory_order_relaxed);
}

double dot(const double* a, const double* b, std::size_t n) { return kernels().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    kernels().axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) { kernels().scale(alpha, x, n); }

void dot_rows(const double* query, const double* rows, std::size_t dim, std::size_t n_rows,
              double* out) {
    kernels().dot_rows(query, rows, dim, n_rows, out);
}

}  // namespace citeverify::simd
