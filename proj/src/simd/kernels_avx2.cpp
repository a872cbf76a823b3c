// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma
// and only entered after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "flaprl/simd/kernels.hpp"

namespace flaprl::simd::avx2 {

namespace {

// Register tile MR x NR: 12 accumulators, two B vectors, one A broadcast.
constexpr int kMR = 6;
constexpr int kNR = 16;
constexpr int kKC = 256;
constexpr int kMC = 96;
constexpr int kNC = 1024;

struct alignas(64) PackBuffers {
    float a[kMC * kKC];
    float b[kKC * kNC];
};

PackBuffers& buffers() {
    thread_local std::unique_ptr<PackBuffers> bufs = std::make_unique<PackBuffers>();
    return *bufs;
}

// Panels of kMR rows, each stored p-major: dst[p*kMR + r]. Short panels are zero padded.
void pack_a(Trans ta, const float* a, int lda, int i0, int mc, int p0, int kc, float* dst) {
    for (int ir = 0; ir < mc; ir += kMR) {
        const int rows = std::min(kMR, mc - ir);
        float* panel = dst + static_cast<std::ptrdiff_t>(ir) * kc;
        if (ta == Trans::no) {
            const float* src[kMR];
            for (int r = 0; r < kMR; ++r) {
                src[r] = r < rows ? a + static_cast<std::ptrdiff_t>(i0 + ir + r) * lda + p0 : nullptr;
            }
            for (int p = 0; p < kc; ++p) {
                for (int r = 0; r < kMR; ++r) panel[p * kMR + r] = r < rows ? src[r][p] : 0.0f;
            }
        } else {
            for (int p = 0; p < kc; ++p) {
                const float* src = a + static_cast<std::ptrdiff_t>(p0 + p) * lda + i0 + ir;
                for (int r = 0; r < kMR; ++r) panel[p * kMR + r] = r < rows ? src[r] : 0.0f;
            }
        }
    }
}

// Panels of kNR columns, each stored p-major: dst[p*kNR + c].
void pack_b(Trans tb, const float* b, int ldb, int p0, int kc, int j0, int nc, float* dst) {
    for (int jr = 0; jr < nc; jr += kNR) {
        const int cols = std::min(kNR, nc - jr);
        float* panel = dst + static_cast<std::ptrdiff_t>(jr) * kc;
        if (tb == Trans::no) {
            for (int p = 0; p < kc; ++p) {
                const float* src = b + static_cast<std::ptrdiff_t>(p0 + p) * ldb + j0 + jr;
                float* out = panel + p * kNR;
                if (cols == kNR) {
                    _mm256_store_ps(out, _mm256_loadu_ps(src));
                    _mm256_store_ps(out + 8, _mm256_loadu_ps(src + 8));
                } else {
                    for (int c = 0; c < kNR; ++c) out[c] = c < cols ? src[c] : 0.0f;
                }
            }
        } else {
            if (cols < kNR) std::memset(panel, 0, sizeof(float) * kNR * kc);
            for (int c = 0; c < cols; ++c) {
                const float* src = b + static_cast<std::ptrdiff_t>(j0 + jr + c) * ldb + p0;
                for (int p = 0; p < kc; ++p) panel[p * kNR + c] = src[p];
            }
        }
    }
}

void micro_kernel(int kc, const float* ap, const float* bp, float* c, int ldc, int mr, int nr) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
    __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_load_ps(bp);
        const __m256 b1 = _mm256_load_ps(bp + 8);
        __m256 a = _mm256_broadcast_ss(ap + 0);
        c00 = _mm256_fmadd_ps(a, b0, c00);
        c01 = _mm256_fmadd_ps(a, b1, c01);
        a = _mm256_broadcast_ss(ap + 1);
        c10 = _mm256_fmadd_ps(a, b0, c10);
        c11 = _mm256_fmadd_ps(a, b1, c11);
        a = _mm256_broadcast_ss(ap + 2);
        c20 = _mm256_fmadd_ps(a, b0, c20);
        c21 = _mm256_fmadd_ps(a, b1, c21);
        a = _mm256_broadcast_ss(ap + 3);
        c30 = _mm256_fmadd_ps(a, b0, c30);
        c31 = _mm256_fmadd_ps(a, b1, c31);
        a = _mm256_broadcast_ss(ap + 4);
        c40 = _mm256_fmadd_ps(a, b0, c40);
        c41 = _mm256_fmadd_ps(a, b1, c41);
        a = _mm256_broadcast_ss(ap + 5);
        c50 = _mm256_fmadd_ps(a, b0, c50);
        c51 = _mm256_fmadd_ps(a, b1, c51);
        ap += kMR;
        bp += kNR;
    }

    const __m256 acc[kMR][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};
    if (mr == kMR && nr == kNR) {
        for (int r = 0; r < kMR; ++r) {
            float* row = c + static_cast<std::ptrdiff_t>(r) * ldc;
            _mm256_storeu_ps(row, _mm256_add_ps(_mm256_loadu_ps(row), acc[r][0]));
            _mm256_storeu_ps(row + 8, _mm256_add_ps(_mm256_loadu_ps(row + 8), acc[r][1]));
        }
        return;
    }
    alignas(32) float tile[kMR * kNR];
    for (int r = 0; r < kMR; ++r) {
        _mm256_store_ps(tile + r * kNR, acc[r][0]);
        _mm256_store_ps(tile + r * kNR + 8, acc[r][1]);
    }
    for (int r = 0; r < mr; ++r) {
        float* row = c + static_cast<std::ptrdiff_t>(r) * ldc;
        for (int j = 0; j < nr; ++j) row[j] += tile[r * kNR + j];
    }
}

void scale_c(int m, int n, float beta, float* c, int ldc) {
    if (beta == 1.0f) return;
    for (int i = 0; i < m; ++i) {
        float* row = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == 0.0f) {
            std::fill(row, row + n, 0.0f);
        } else {
            for (int j = 0; j < n; ++j) row[j] *= beta;
        }
    }
}

void gemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
    scale_c(m, n, beta, c, ldc);
    if (m <= 0 || n <= 0 || k <= 0) return;
    PackBuffers& buf = buffers();
    for (int jc = 0; jc < n; jc += kNC) {
        const int nc = std::min(kNC, n - jc);
        for (int pc = 0; pc < k; pc += kKC) {
            const int kc = std::min(kKC, k - pc);
            pack_b(tb, b, ldb, pc, kc, jc, nc, buf.b);
            for (int ic = 0; ic < m; ic += kMC) {
                const int mc = std::min(kMC, m - ic);
                pack_a(ta, a, lda, ic, mc, pc, kc, buf.a);
                for (int jr = 0; jr < nc; jr += kNR) {
                    const float* bp = buf.b + static_cast<std::ptrdiff_t>(jr) * kc;
                    for (int ir = 0; ir < mc; ir += kMR) {
                        const float* ap = buf.a + static_cast<std::ptrdiff_t>(ir) * kc;
                        float* cp = c + static_cast<std::ptrdiff_t>(ic + ir) * ldc + jc + jr;
                        micro_kernel(kc, ap, bp, cp, ldc, std::min(kMR, mc - ir), std::min(kNR, nc - jr));
                    }
                }
            }
        }
    }
}

void relu(const float* in, float* out, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(in + i), zero));
    for (; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward(const float* out, const float* grad_out, float* grad_in, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(out + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(grad_in + i, _mm256_and_ps(mask, _mm256_loadu_ps(grad_out + i)));
    }
    for (; i < n; ++i) grad_in[i] = out[i] > 0.0f ? grad_out[i] : 0.0f;
}

void add_bias(float* y, const float* bias, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        float* row = y + static_cast<std::ptrdiff_t>(r) * cols;
        int j = 0;
        for (; j + 8 <= cols; j += 8) {
            _mm256_storeu_ps(row + j, _mm256_add_ps(_mm256_loadu_ps(row + j), _mm256_loadu_ps(bias + j)));
        }
        for (; j < cols; ++j) row[j] += bias[j];
    }
}

void column_sums(const float* x, float* out, int rows, int cols) {
    std::fill(out, out + cols, 0.0f);
    for (int r = 0; r < rows; ++r) {
        const float* row = x + static_cast<std::ptrdiff_t>(r) * cols;
        int j = 0;
        for (; j + 8 <= cols; j += 8) {
            _mm256_storeu_ps(out + j, _mm256_add_ps(_mm256_loadu_ps(out + j), _mm256_loadu_ps(row + j)));
        }
        for (; j < cols; ++j) out[j] += row[j];
    }
}

void adam(float* params, const float* grads, float* m, float* v, std::size_t n, const AdamCoefficients& k) {
    const __m256 b1 = _mm256_set1_ps(k.beta1);
    const __m256 b2 = _mm256_set1_ps(k.beta2);
    const __m256 one_b1 = _mm256_set1_ps(1.0f - k.beta1);
    const __m256 one_b2 = _mm256_set1_ps(1.0f - k.beta2);
    const __m256 c1 = _mm256_set1_ps(k.bias1);
    const __m256 c2 = _mm256_set1_ps(k.bias2);
    const __m256 lr = _mm256_set1_ps(k.lr);
    const __m256 eps = _mm256_set1_ps(k.epsilon);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grads + i);
        const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(one_b1, g));
        const __m256 vi =
            _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)), _mm256_mul_ps(_mm256_mul_ps(one_b2, g), g));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, c2)), eps);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, _mm256_mul_ps(mi, c1)), denom);
        _mm256_storeu_ps(params + i, _mm256_sub_ps(_mm256_loadu_ps(params + i), step));
    }
    for (; i < n; ++i) {
        const float g = grads[i];
        m[i] = k.beta1 * m[i] + (1.0f - k.beta1) * g;
        v[i] = k.beta2 * v[i] + (1.0f - k.beta2) * g * g;
        params[i] -= k.lr * (m[i] * k.bias1) / (std::sqrt(v[i] * k.bias2) + k.epsilon);
    }
}

const KernelTable kAvx2{
    "avx2", &gemm, &relu, &relu_backward, &add_bias, &column_sums, &adam,
};

}  // namespace

const KernelTable& table() { return kAvx2; }

}  // namespace flaprl::simd::avx2
