#pragma once

// Element-type dispatch: float goes through the runtime-selected kernel
// table, double through the portable reference templates.

#include "flaprl/simd/kernels.hpp"
#include "flaprl/simd/reference.hpp"

namespace flaprl::nn::detail {

using simd::Trans;

template <class T>
struct Ops;

template <>
struct Ops<float> {
    static void gemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                     float beta, float* c, int ldc) {
        simd::active_kernels().gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
    }
    static void relu(const float* in, float* out, std::size_t n) { simd::active_kernels().relu(in, out, n); }
    static void relu_backward(const float* out, const float* go, float* gi, std::size_t n) {
        simd::active_kernels().relu_backward(out, go, gi, n);
    }
    static void add_bias(float* y, const float* b, int rows, int cols) {
        simd::active_kernels().add_bias(y, b, rows, cols);
    }
    static void column_sums(const float* x, float* out, int rows, int cols) {
        simd::active_kernels().column_sums(x, out, rows, cols);
    }
};

template <>
struct Ops<double> {
    static void gemm(Trans ta, Trans tb, int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                     double beta, double* c, int ldc) {
        simd::reference::gemm<double>(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
    }
    static void relu(const double* in, double* out, std::size_t n) { simd::reference::relu(in, out, n); }
    static void relu_backward(const double* out, const double* go, double* gi, std::size_t n) {
        simd::reference::relu_backward(out, go, gi, n);
    }
    static void add_bias(double* y, const double* b, int rows, int cols) {
        simd::reference::add_bias(y, b, rows, cols);
    }
    static void column_sums(const double* x, double* out, int rows, int cols) {
        simd::reference::column_sums(x, out, rows, cols);
    }
};

}  // namespace flaprl::nn::detail
