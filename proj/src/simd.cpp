#include "qdiff/simd.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define QDIFF_HAVE_X86 1
#endif

namespace qdiff::simd {

namespace {

std::complex<double> cdot_scalar(const double* ar, const double* ai, const double* br,
                                 const double* bi, std::size_t n) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
        re += ar[i] * br[i] - ai[i] * bi[i];
        im += ar[i] * bi[i] + ai[i] * br[i];
    }
    return {re, im};
}

void crotate_scalar(double* re, double* im, const double* cr, const double* ci, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double r = re[i] * cr[i] - im[i] * ci[i];
        double m = re[i] * ci[i] + im[i] * cr[i];
        re[i] = r;
        im[i] = m;
    }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

#ifdef QDIFF_HAVE_X86

__attribute__((target("avx2,fma"))) double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

__attribute__((target("avx2,fma"))) std::complex<double> cdot_avx2(
    const double* ar, const double* ai, const double* br, const double* bi, std::size_t n) {
    __m256d re = _mm256_setzero_pd(), im = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_loadu_pd(ar + i), b = _mm256_loadu_pd(ai + i);
        __m256d c = _mm256_loadu_pd(br + i), d = _mm256_loadu_pd(bi + i);
        re = _mm256_fmadd_pd(a, c, re);
        re = _mm256_fnmadd_pd(b, d, re);
        im = _mm256_fmadd_pd(a, d, im);
        im = _mm256_fmadd_pd(b, c, im);
    }
    double sre = hsum(re), sim = hsum(im);
    for (; i < n; ++i) {
        sre += ar[i] * br[i] - ai[i] * bi[i];
        sim += ar[i] * bi[i] + ai[i] * br[i];
    }
    return {sre, sim};
}

__attribute__((target("avx2,fma"))) void crotate_avx2(double* re, double* im, const double* cr,
                                                      const double* ci, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_loadu_pd(re + i), b = _mm256_loadu_pd(im + i);
        __m256d c = _mm256_loadu_pd(cr + i), d = _mm256_loadu_pd(ci + i);
        __m256d r = _mm256_fmsub_pd(a, c, _mm256_mul_pd(b, d));
        __m256d m = _mm256_fmadd_pd(a, d, _mm256_mul_pd(b, c));
        _mm256_storeu_pd(re + i, r);
        _mm256_storeu_pd(im + i, m);
    }
    crotate_scalar(re + i, im + i, cr + i, ci + i, n - i);
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double a, const double* x, double* y,
                                                   std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

const Kernels kAvx2{cdot_avx2, crotate_avx2, axpy_avx2, "avx2"};

#endif

const Kernels kScalar{cdot_scalar, crotate_scalar, axpy_scalar, "scalar"};

}  // namespace

const Kernels& scalar() { return kScalar; }

const Kernels* avx2() {
#ifdef QDIFF_HAVE_X86
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const Kernels& active() {
    static const Kernels* k = [] {
        const char* env = std::getenv("QDIFF_SIMD");
        if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
        const Kernels* v = avx2();
        return v ? v : &kScalar;
    }();
    return *k;
}

}  // namespace qdiff::simd
