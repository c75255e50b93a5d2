#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "xopgan/numerics/simd.hpp"

namespace xopgan::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = dot_scalar(a + i * lda, b + j * ldb, k);
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
                    std::size_t a_col, const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double alpha = a[i * a_row + p * a_col];
            double* crow = c + i * ldc;
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += alpha * brow[j];
        }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kScalar{Isa::Scalar, "scalar", &dot_scalar, &gemm_nt_scalar, &gemm_nn_scalar, &axpy_scalar};

std::atomic<const KernelTable*> g_pinned{nullptr};

const KernelTable& detect() noexcept {
    if (const char* env = std::getenv("XOPGAN_SIMD")) {
        std::string_view v(env);
        if (v == "scalar") return kScalar;
        if (v == "avx2" && avx2_kernels()) return *avx2_kernels();
        if (v == "neon" && neon_kernels()) return *neon_kernels();
    }
    if (auto* t = avx2_kernels()) return *t;
    if (auto* t = neon_kernels()) return *t;
    return kScalar;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable& active() noexcept {
    if (auto* p = g_pinned.load(std::memory_order_acquire)) return *p;
    static const KernelTable& detected = detect();
    return detected;
}

bool select(Isa isa) noexcept {
    const KernelTable* t = nullptr;
    switch (isa) {
        case Isa::Scalar: t = &kScalar; break;
        case Isa::Avx2: t = avx2_kernels(); break;
        case Isa::Neon: t = neon_kernels(); break;
    }
    if (!t) return false;
    g_pinned.store(t, std::memory_order_release);
    return true;
}

void reset() noexcept { g_pinned.store(nullptr, std::memory_order_release); }

}  // namespace xopgan::simd
