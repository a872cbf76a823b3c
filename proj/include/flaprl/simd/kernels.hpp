#pragma once

#include <cstddef>
#include <string_view>

namespace flaprl::simd {

enum class Trans : bool { no = false, yes = true };

/// Per-step Adam scalars. bias1 = 1/(1-beta1^t), bias2 = 1/(1-beta2^t).
struct AdamCoefficients {
    float lr;
    float beta1;
    float beta2;
    float epsilon;
    float bias1;
    float bias2;
};

/// Single-precision inner loops used by the network engine. Every table
/// computes the same functions; they differ only in instruction selection
/// and floating-point summation order.
struct KernelTable {
    std::string_view name;

    /// C[m x n] = op(A)[m x k] * op(B)[k x n] + beta * C, all row-major.
    /// op(A)(i,p) is a[i*lda+p] or a[p*lda+i] when transposed; same for B.
    void (*gemm)(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc);

    void (*relu)(const float* in, float* out, std::size_t n);

    /// grad_in = grad_out where out > 0, else 0.
    void (*relu_backward)(const float* out, const float* grad_out, float* grad_in, std::size_t n);

    /// y[r*cols + c] += bias[c]
    void (*add_bias)(float* y, const float* bias, int rows, int cols);

    /// out[c] = sum over r of x[r*cols + c]
    void (*column_sums)(const float* x, float* out, int rows, int cols);

    /// In-place Adam update with bias correction.
    void (*adam)(float* params, const float* grads, float* m, float* v, std::size_t n, const AdamCoefficients& k);
};

const KernelTable& scalar_kernels();

/// nullptr when the build or the host CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Chosen once on first use: AVX2 when available unless FLAPRL_SIMD=scalar.
const KernelTable& active_kernels();

/// Overrides the active table (tests and benchmarks). Not thread-safe with
/// concurrent kernel use.
void set_active_kernels(const KernelTable& table);

}  // namespace flaprl::simd
