#include "xopgan/numerics/simd.hpp"

#include <algorithm>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define XOPGAN_HAVE_X86 1
#endif

namespace xopgan::simd {

#ifdef XOPGAN_HAVE_X86

namespace {

#define XOPGAN_AVX2 __attribute__((target("avx2,fma")))

XOPGAN_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

XOPGAN_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Every gemm_nt element is a 4-lane FMA dot over the first k - k % 4 terms,
// reduced by hsum, then a sequential FMA tail. The tiled and edge paths share
// this order, so a result never depends on where a block boundary falls.
XOPGAN_AVX2 double dot_exact(const double* a, const double* b, std::size_t k) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + p), _mm256_loadu_pd(b + p), acc);
    double s = hsum(acc);
    for (; p < k; ++p) s = __builtin_fma(a[p], b[p], s);
    return s;
}

XOPGAN_AVX2 void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                              const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    const std::size_t k4 = k - k % 4;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const double* b0 = b + j * ldb;
        const double* b1 = b0 + ldb;
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            const double* a0 = a + i * lda;
            const double* a1 = a0 + lda;
            const double* a2 = a1 + lda;
            const double* a3 = a2 + lda;
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k4; p += 4) {
                const __m256d vb0 = _mm256_loadu_pd(b0 + p);
                const __m256d vb1 = _mm256_loadu_pd(b1 + p);
                __m256d va = _mm256_loadu_pd(a0 + p);
                c00 = _mm256_fmadd_pd(va, vb0, c00);
                c01 = _mm256_fmadd_pd(va, vb1, c01);
                va = _mm256_loadu_pd(a1 + p);
                c10 = _mm256_fmadd_pd(va, vb0, c10);
                c11 = _mm256_fmadd_pd(va, vb1, c11);
                va = _mm256_loadu_pd(a2 + p);
                c20 = _mm256_fmadd_pd(va, vb0, c20);
                c21 = _mm256_fmadd_pd(va, vb1, c21);
                va = _mm256_loadu_pd(a3 + p);
                c30 = _mm256_fmadd_pd(va, vb0, c30);
                c31 = _mm256_fmadd_pd(va, vb1, c31);
            }
            double s[8] = {hsum(c00), hsum(c01), hsum(c10), hsum(c11), hsum(c20), hsum(c21), hsum(c30), hsum(c31)};
            const double* rows[4] = {a0, a1, a2, a3};
            for (std::size_t p = k4; p < k; ++p)
                for (int r = 0; r < 4; ++r) {
                    s[2 * r] = __builtin_fma(rows[r][p], b0[p], s[2 * r]);
                    s[2 * r + 1] = __builtin_fma(rows[r][p], b1[p], s[2 * r + 1]);
                }
            for (int r = 0; r < 4; ++r) {
                c[(i + r) * ldc + j] = s[2 * r];
                c[(i + r) * ldc + j + 1] = s[2 * r + 1];
            }
        }
        for (; i < m; ++i) {
            c[i * ldc + j] = dot_exact(a + i * lda, b0, k);
            c[i * ldc + j + 1] = dot_exact(a + i * lda, b1, k);
        }
    }
    for (; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) c[i * ldc + j] = dot_exact(a + i * lda, b + j * ldb, k);
}

// Every gemm_nn element starts from c (or zero) and takes one FMA per p in
// ascending order, whichever path computes it.
XOPGAN_AVX2 void gemm_nn_rows(std::size_t i0, std::size_t rows, std::size_t n, std::size_t p0, std::size_t p1,
                              const double* a, std::size_t a_row, std::size_t a_col, const double* b,
                              std::size_t ldb, double* c, std::size_t ldc, bool load) {
    std::size_t j = 0;
    if (rows == 4) {
        double* r0 = c + i0 * ldc;
        double* r1 = r0 + ldc;
        double* r2 = r1 + ldc;
        double* r3 = r2 + ldc;
        const double* a0 = a + i0 * a_row;
        for (; j + 8 <= n; j += 8) {
            const __m256d z = _mm256_setzero_pd();
            __m256d c00 = load ? _mm256_loadu_pd(r0 + j) : z, c01 = load ? _mm256_loadu_pd(r0 + j + 4) : z;
            __m256d c10 = load ? _mm256_loadu_pd(r1 + j) : z, c11 = load ? _mm256_loadu_pd(r1 + j + 4) : z;
            __m256d c20 = load ? _mm256_loadu_pd(r2 + j) : z, c21 = load ? _mm256_loadu_pd(r2 + j + 4) : z;
            __m256d c30 = load ? _mm256_loadu_pd(r3 + j) : z, c31 = load ? _mm256_loadu_pd(r3 + j + 4) : z;
            for (std::size_t p = p0; p < p1; ++p) {
                const double* bp = b + p * ldb + j;
                const __m256d vb0 = _mm256_loadu_pd(bp);
                const __m256d vb1 = _mm256_loadu_pd(bp + 4);
                const double* ap = a0 + p * a_col;
                __m256d va = _mm256_broadcast_sd(ap);
                c00 = _mm256_fmadd_pd(va, vb0, c00);
                c01 = _mm256_fmadd_pd(va, vb1, c01);
                va = _mm256_broadcast_sd(ap + a_row);
                c10 = _mm256_fmadd_pd(va, vb0, c10);
                c11 = _mm256_fmadd_pd(va, vb1, c11);
                va = _mm256_broadcast_sd(ap + 2 * a_row);
                c20 = _mm256_fmadd_pd(va, vb0, c20);
                c21 = _mm256_fmadd_pd(va, vb1, c21);
                va = _mm256_broadcast_sd(ap + 3 * a_row);
                c30 = _mm256_fmadd_pd(va, vb0, c30);
                c31 = _mm256_fmadd_pd(va, vb1, c31);
            }
            _mm256_storeu_pd(r0 + j, c00);
            _mm256_storeu_pd(r0 + j + 4, c01);
            _mm256_storeu_pd(r1 + j, c10);
            _mm256_storeu_pd(r1 + j + 4, c11);
            _mm256_storeu_pd(r2 + j, c20);
            _mm256_storeu_pd(r2 + j + 4, c21);
            _mm256_storeu_pd(r3 + j, c30);
            _mm256_storeu_pd(r3 + j + 4, c31);
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = c + (i0 + r) * ldc;
        const double* ar = a + (i0 + r) * a_row;
        std::size_t jj = j;
        for (; jj + 4 <= n; jj += 4) {
            __m256d acc = load ? _mm256_loadu_pd(crow + jj) : _mm256_setzero_pd();
            for (std::size_t p = p0; p < p1; ++p)
                acc = _mm256_fmadd_pd(_mm256_broadcast_sd(ar + p * a_col), _mm256_loadu_pd(b + p * ldb + jj), acc);
            _mm256_storeu_pd(crow + jj, acc);
        }
        for (; jj < n; ++jj) {
            double acc = load ? crow[jj] : 0.0;
            for (std::size_t p = p0; p < p1; ++p) acc = __builtin_fma(ar[p * a_col], b[p * ldb + jj], acc);
            crow[jj] = acc;
        }
    }
}

XOPGAN_AVX2 void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
                              std::size_t a_col, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                              bool accumulate) {
    constexpr std::size_t kBlock = 64;
    if (k == 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);
        return;
    }
    for (std::size_t p0 = 0; p0 < k; p0 += kBlock) {
        const std::size_t p1 = std::min(k, p0 + kBlock);
        const bool load = accumulate || p0 > 0;
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) gemm_nn_rows(i, 4, n, p0, p1, a, a_row, a_col, b, ldb, c, ldc, load);
        for (; i < m; ++i) gemm_nn_rows(i, 1, n, p0, p1, a, a_row, a_col, b, ldb, c, ldc, load);
    }
}

XOPGAN_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kAvx2{Isa::Avx2, "avx2", &dot_avx2, &gemm_nt_avx2, &gemm_nn_avx2, &axpy_avx2};

}  // namespace

const KernelTable* avx2_kernels() noexcept {
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2_kernels() noexcept { return nullptr; }

#endif

}  // namespace xopgan::simd
