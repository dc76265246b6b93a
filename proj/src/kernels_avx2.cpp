// AVX2+FMA kernel variant. Compiled with -mavx2 -mfma in this TU only;
// callers reach it through the dispatch table after a runtime CPU check.
//
// Bitwise contract vs the scalar reference: every op whose per-element
// accumulation order is unchanged by vectorizing (the backward ops, bias
// sums, relu, sgd, axpy) produces bit-identical results, because the scalar
// reference uses std::fma where this TU uses vfmadd. Only dot and
// dense_forward split their reduction across lanes and are tested to a
// tolerance instead.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "pdiff/kernels.hpp"

namespace pdiff::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double r = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) r = std::fma(a[i], b[i], r);
    return r;
}

// 8 output units per block: 8 independent FMA chains share each x load.
void dense_forward_avx2(const double* x, const double* w, const double* b, double* y,
                        std::size_t s, std::size_t d, std::size_t o) {
    for (std::size_t i = 0; i < s; ++i) {
        const double* xi = x + i * d;
        double* yi = y + i * o;
        std::size_t j = 0;
        for (; j + 8 <= o; j += 8) {
            const double* w0 = w + (j + 0) * d;
            const double* w1 = w + (j + 1) * d;
            const double* w2 = w + (j + 2) * d;
            const double* w3 = w + (j + 3) * d;
            const double* w4 = w + (j + 4) * d;
            const double* w5 = w + (j + 5) * d;
            const double* w6 = w + (j + 6) * d;
            const double* w7 = w + (j + 7) * d;
            __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
            __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
            __m256d a4 = _mm256_setzero_pd(), a5 = _mm256_setzero_pd();
            __m256d a6 = _mm256_setzero_pd(), a7 = _mm256_setzero_pd();
            std::size_t k = 0;
            for (; k + 4 <= d; k += 4) {
                const __m256d xv = _mm256_loadu_pd(xi + k);
                a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w0 + k), a0);
                a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w1 + k), a1);
                a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w2 + k), a2);
                a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w3 + k), a3);
                a4 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w4 + k), a4);
                a5 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w5 + k), a5);
                a6 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w6 + k), a6);
                a7 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w7 + k), a7);
            }
            double r0 = hsum(a0), r1 = hsum(a1), r2 = hsum(a2), r3 = hsum(a3);
            double r4 = hsum(a4), r5 = hsum(a5), r6 = hsum(a6), r7 = hsum(a7);
            for (; k < d; ++k) {
                const double xv = xi[k];
                r0 = std::fma(xv, w0[k], r0);
                r1 = std::fma(xv, w1[k], r1);
                r2 = std::fma(xv, w2[k], r2);
                r3 = std::fma(xv, w3[k], r3);
                r4 = std::fma(xv, w4[k], r4);
                r5 = std::fma(xv, w5[k], r5);
                r6 = std::fma(xv, w6[k], r6);
                r7 = std::fma(xv, w7[k], r7);
            }
            yi[j + 0] = r0 + b[j + 0];
            yi[j + 1] = r1 + b[j + 1];
            yi[j + 2] = r2 + b[j + 2];
            yi[j + 3] = r3 + b[j + 3];
            yi[j + 4] = r4 + b[j + 4];
            yi[j + 5] = r5 + b[j + 5];
            yi[j + 6] = r6 + b[j + 6];
            yi[j + 7] = r7 + b[j + 7];
        }
        for (; j < o; ++j) yi[j] = dot_avx2(xi, w + j * d, d) + b[j];
    }
}

inline void fma_accumulate_row(double alpha, const double* src, double* dst, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t k = 0;
    for (; k + 8 <= n; k += 8) {
        _mm256_storeu_pd(dst + k, _mm256_fmadd_pd(av, _mm256_loadu_pd(src + k),
                                                  _mm256_loadu_pd(dst + k)));
        _mm256_storeu_pd(dst + k + 4, _mm256_fmadd_pd(av, _mm256_loadu_pd(src + k + 4),
                                                      _mm256_loadu_pd(dst + k + 4)));
    }
    for (; k + 4 <= n; k += 4)
        _mm256_storeu_pd(dst + k,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(src + k), _mm256_loadu_pd(dst + k)));
    for (; k < n; ++k) dst[k] = std::fma(alpha, src[k], dst[k]);
}

void dense_backward_data_avx2(const double* dy, const double* w, double* dx, std::size_t s,
                              std::size_t d, std::size_t o) {
    std::memset(dx, 0, s * d * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        double* dxi = dx + i * d;
        for (std::size_t j = 0; j < o; ++j) fma_accumulate_row(dyi[j], w + j * d, dxi, d);
    }
}

void dense_backward_weights_avx2(const double* dy, const double* x, double* dw, std::size_t s,
                                 std::size_t d, std::size_t o) {
    std::memset(dw, 0, o * d * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        const double* xi = x + i * d;
        for (std::size_t j = 0; j < o; ++j) fma_accumulate_row(dyi[j], xi, dw + j * d, d);
    }
}

void bias_backward_avx2(const double* dy, double* db, std::size_t s, std::size_t o) {
    std::memset(db, 0, o * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        std::size_t j = 0;
        for (; j + 4 <= o; j += 4)
            _mm256_storeu_pd(db + j,
                             _mm256_add_pd(_mm256_loadu_pd(db + j), _mm256_loadu_pd(dyi + j)));
        for (; j < o; ++j) db[j] += dyi[j];
    }
}

void relu_forward_avx2(double* z, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
    for (; i < n; ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward_avx2(const double* a, double* da, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(a + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(da + i, _mm256_and_pd(_mm256_loadu_pd(da + i), mask));
    }
    for (; i < n; ++i)
        if (!(a[i] > 0.0)) da[i] = 0.0;
}

void sgd_momentum_avx2(double* w, double* v, const double* g, double lr, double mu,
                       std::size_t n) {
    const __m256d muv = _mm256_set1_pd(mu);
    const __m256d lrv = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vn = _mm256_fmadd_pd(muv, _mm256_loadu_pd(v + i), _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(v + i, vn);
        _mm256_storeu_pd(w + i, _mm256_fnmadd_pd(lrv, vn, _mm256_loadu_pd(w + i)));
    }
    for (; i < n; ++i) {
        v[i] = std::fma(mu, v[i], g[i]);
        w[i] = std::fma(-lr, v[i], w[i]);
    }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    fma_accumulate_row(alpha, x, y, n);
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        dense_forward_avx2,  dense_backward_data_avx2, dense_backward_weights_avx2,
        bias_backward_avx2,  relu_forward_avx2,        relu_backward_avx2,
        sgd_momentum_avx2,   dot_avx2,                 axpy_avx2,
    };
    return table;
}

}  // namespace pdiff::kernels
