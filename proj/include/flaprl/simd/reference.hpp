#pragma once

// Portable reference kernels, generic over the element type. The float
// instantiations back the scalar KernelTable; double is used directly by
// the network engine for gradient checks.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "flaprl/simd/kernels.hpp"

namespace flaprl::simd::reference {

template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c,
          int ldc) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == T(0)) {
            std::fill(crow, crow + n, T(0));
        } else if (beta != T(1)) {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
    }
    if (tb == Trans::no) {
        // i-p-j keeps the innermost loop on contiguous rows of B and C.
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int p = 0; p < k; ++p) {
                const T av = ta == Trans::no ? a[static_cast<std::ptrdiff_t>(i) * lda + p]
                                             : a[static_cast<std::ptrdiff_t>(p) * lda + i];
                if (av == T(0)) continue;
                const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int j = 0; j < n; ++j) {
                const T* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
                T acc = T(0);
                if (ta == Trans::no) {
                    const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
                    for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
                } else {
                    for (int p = 0; p < k; ++p) acc += a[static_cast<std::ptrdiff_t>(p) * lda + i] * brow[p];
                }
                crow[j] += acc;
            }
        }
    }
}

template <class T>
void relu(const T* in, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <class T>
void relu_backward(const T* out, const T* grad_out, T* grad_in, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) grad_in[i] = out[i] > T(0) ? grad_out[i] : T(0);
}

template <class T>
void add_bias(T* y, const T* bias, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        T* row = y + static_cast<std::ptrdiff_t>(r) * cols;
        for (int c = 0; c < cols; ++c) row[c] += bias[c];
    }
}

template <class T>
void column_sums(const T* x, T* out, int rows, int cols) {
    std::fill(out, out + cols, T(0));
    for (int r = 0; r < rows; ++r) {
        const T* row = x + static_cast<std::ptrdiff_t>(r) * cols;
        for (int c = 0; c < cols; ++c) out[c] += row[c];
    }
}

template <class T>
void adam(T* params, const T* grads, T* m, T* v, std::size_t n, T lr, T beta1, T beta2, T epsilon, T bias1,
          T bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grads[i];
        m[i] = beta1 * m[i] + (T(1) - beta1) * g;
        v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
        const T m_hat = m[i] * bias1;
        const T v_hat = v[i] * bias2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
}

}  // namespace flaprl::simd::reference
