#pragma once

// Dense double-precision kernels used by the vector encoder and the exact
// inner-product search.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is chosen once at runtime from the CPU features; the
// environment variable CITEVERIFY_ISA=scalar forces the reference path.
//
// The scalar reference accumulates in the same lane order as the vector code
// (two 4-lane accumulators, pairwise horizontal reduction, sequential tail)
// and neither path uses fused multiply-add, so both produce bit-identical
// results. Search results therefore do not depend on the host CPU.

#include <cstddef>
#include <span>
#include <string_view>

namespace citeverify::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

/// True when the variant was compiled in and the CPU supports it.
bool isa_supported(Isa isa);

Isa active_isa();

/// Overrides the runtime selection. Throws std::invalid_argument for an
/// unsupported variant.
void set_active_isa(Isa isa);

double dot(const double* a, const double* b, std::size_t n);
/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
/// x *= alpha
void scale(double alpha, double* x, std::size_t n);
/// out[r] = dot(query, rows + r * dim) for r in [0, n_rows)
void dot_rows(const double* query, const double* rows, std::size_t dim, std::size_t n_rows,
              double* out);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void dot_rows(const double* query, const double* rows, std::size_t dim, std::size_t n_rows,
              double* out);
}  // namespace scalar

#if defined(CITEVERIFY_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void dot_rows(const double* query, const double* rows, std::size_t dim, std::size_t n_rows,
              double* out);
}  // namespace avx2
#endif

}  // namespace citeverify::simd
