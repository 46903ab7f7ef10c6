#include "citeverify/simd.hpp"

namespace citeverify::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    // Lane layout mirrors avx2::dot exactly; see simd.hpp.
    double acc0[4] = {0.0, 0.0, 0.0, 0.0};
    double acc1[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 4; ++l) {
            acc0[l] += a[i + l] * b[i + l];
            acc1[l] += a[i + 4 + l] * b[i + 4 + l];
        }
    }
    if (i + 4 <= n) {
        for (std::size_t l = 0; l < 4; ++l) acc0[l] += a[i + l] * b[i + l];
        i += 4;
    }
    double s[4];
    for (std::size_t l = 0; l < 4; ++l) s[l] = acc0[l] + acc1[l];
    double r = (s[0] + s[1]) + (s[2] + s[3]);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void dot_rows(const double* query, const double* rows, std::size_t dim, std::size_t n_rows,
              double* out) {
    for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot(query, rows + r * dim, dim);
}

}  // namespace citeverify::simd::scalar
