#pragma once

#include <complex>
#include <cstddef>

namespace qdiff::simd {

// Split-complex inner loops. Arrays hold real and imaginary parts separately.
struct Kernels {
    // sum_i (ar_i + i ai_i)(br_i + i bi_i)
    std::complex<double> (*cdot)(const double* ar, const double* ai, const double* br,
                                 const double* bi, std::size_t n);
    // (re_i + i im_i) *= (cr_i + i ci_i)
    void (*crotate)(double* re, double* im, const double* cr, const double* ci, std::size_t n);
    // y_i += a x_i
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    const char* name;
};

const Kernels& scalar();
// Returns nullptr when the build or the CPU lacks AVX2+FMA.
const Kernels* avx2();

// Kernels used by the library: AVX2 when available unless QDIFF_SIMD=scalar.
const Kernels& active();

}  // namespace qdiff::simd
