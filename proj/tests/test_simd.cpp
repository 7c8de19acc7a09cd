#include <doctest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "qdiff/simd.hpp"

using namespace qdiff;

namespace {

struct Arrays {
    std::vector<double> ar, ai, br, bi;
};

Arrays random_arrays(gen::Rng& rng, std::size_t n) {
    Arrays a;
    for (auto* v : {&a.ar, &a.ai, &a.br, &a.bi}) {
        v->resize(n);
        for (auto& x : *v) x = rng.normal();
    }
    return a;
}

}  // namespace

TEST_CASE("active kernels fall back to scalar when forced") {
    setenv("QDIFF_SIMD", "scalar", 1);
    CHECK(std::string(simd::active().name) == "scalar");
    unsetenv("QDIFF_SIMD");
}

TEST_CASE("vector kernels agree with the scalar reference") {
    const simd::Kernels* v = simd::avx2();
    if (!v) {
        MESSAGE("AVX2 unavailable, only scalar kernels exercised");
        return;
    }
    const auto& s = simd::scalar();
    gen::Rng rng(42);
    // lengths around the vector width exercise the remainder loops
    for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 9, 31, 64, 1001}) {
        auto a = random_arrays(rng, n);

        auto cs = s.cdot(a.ar.data(), a.ai.data(), a.br.data(), a.bi.data(), n);
        auto cv = v->cdot(a.ar.data(), a.ai.data(), a.br.data(), a.bi.data(), n);
        CHECK(std::abs(cs - cv) <= 1e-13 * (1 + std::sqrt(double(n))));

        auto re1 = a.ar, im1 = a.ai, re2 = a.ar, im2 = a.ai;
        s.crotate(re1.data(), im1.data(), a.br.data(), a.bi.data(), n);
        v->crotate(re2.data(), im2.data(), a.br.data(), a.bi.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(re1[i] - re2[i]) <= 1e-14 * (1 + std::abs(re1[i])));
            CHECK(std::abs(im1[i] - im2[i]) <= 1e-14 * (1 + std::abs(im1[i])));
        }

        auto y1 = a.bi, y2 = a.bi;
        s.axpy(0.37, a.br.data(), y1.data(), n);
        v->axpy(0.37, a.br.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));
    }
}
