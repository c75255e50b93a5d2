#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop kernels behind the convolution lowering. A portable scalar
// table is always present; vector tables are compiled per ISA and picked at
// runtime from what the CPU reports. All tables compute the same values up to
// floating-point reassociation.

namespace xopgan::simd {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
    Isa isa;
    std::string_view name;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // c[i*ldc + j] = sum_p a[i*lda + p] * b[j*ldb + p]   (i < m, j < n, p < k)
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc);
    // c[i*ldc + j] = c0 + sum_p a[i*a_row + p*a_col] * b[p*ldb + j], accumulated
    // in ascending p, where c0 is the old c when accumulate is set, else 0
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
                    std::size_t a_col, const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// Null when the build or the running CPU lacks the ISA.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// Best table for this CPU unless overridden by select() or the
/// XOPGAN_SIMD environment variable ("scalar", "avx2", "neon").
const KernelTable& active() noexcept;

/// Pin the active table; returns false if the ISA is unavailable.
bool select(Isa isa) noexcept;
/// Return to automatic selection.
void reset() noexcept;

}  // namespace xopgan::simd
