#include <doctest.h>

#include <cstring>
#include <random>
#include <stdexcept>
#include <vector>

#include "citeverify/simd.hpp"

using namespace citeverify;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("scalar reference on small fixtures") {
    const double a[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const double b[] = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    for (std::size_t n = 0; n <= 11; ++n) {
        CHECK(simd::scalar::dot(a, b, n) == static_cast<double>(n * (n + 1) / 2));
    }
    double y[] = {1, 1, 1};
    simd::scalar::axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    simd::scalar::scale(0.5, y, 3);
    CHECK(y[0] == 1.5);
}

TEST_CASE("runtime selection") {
    CHECK(simd::isa_supported(simd::Isa::Scalar));
    const auto before = simd::active_isa();
    simd::set_active_isa(simd::Isa::Scalar);
    CHECK(simd::active_isa() == simd::Isa::Scalar);
    simd::set_active_isa(before);
    if (!simd::isa_supported(simd::Isa::Avx2)) {
        CHECK_THROWS_AS(simd::set_active_isa(simd::Isa::Avx2), std::invalid_argument);
    }
}

#if defined(CITEVERIFY_HAVE_AVX2)
TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
    if (!simd::isa_supported(simd::Isa::Avx2)) {
        MESSAGE("AVX2 not available on this CPU; skipped");
        return;
    }
    std::mt19937_64 rng(21);
    for (std::size_t n = 0; n <= 70; ++n) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            CHECK(same_bits(simd::scalar::dot(a.data(), b.data(), n),
                            simd::avx2::dot(a.data(), b.data(), n)));

            auto y1 = random_vec(rng, n);
            auto y2 = y1;
            simd::scalar::axpy(0.37, a.data(), y1.data(), n);
            simd::avx2::axpy(0.37, a.data(), y2.data(), n);
            CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);

            simd::scalar::scale(-1.7, y1.data(), n);
            simd::avx2::scale(-1.7, y2.data(), n);
            CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);
        }
    }

    for (std::size_t dim : {1u, 3u, 8u, 13u, 64u}) {
        const std::size_t rows = 37;
        const auto q = random_vec(rng, dim);
        const auto m = random_vec(rng, dim * rows);
        std::vector<double> o1(rows), o2(rows);
        simd::scalar::dot_rows(q.data(), m.data(), dim, rows, o1.data());
        simd::avx2::dot_rows(q.data(), m.data(), dim, rows, o2.data());
        CHECK(std::memcmp(o1.data(), o2.data(), rows * sizeof(double)) == 0);
    }
}
#endif
