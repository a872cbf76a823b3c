#include <atomic>
#include <cstdlib>
#include <string_view>

#include "flaprl/simd/kernels.hpp"
#include "flaprl/simd/reference.hpp"

namespace flaprl::simd {

#if defined(FLAPRL_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif

namespace {

void scalar_gemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc) {
    reference::gemm<float>(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void scalar_adam(float* p, const float* g, float* m, float* v, std::size_t n, const AdamCoefficients& k) {
    reference::adam<float>(p, g, m, v, n, k.lr, k.beta1, k.beta2, k.epsilon, k.bias1, k.bias2);
}

const KernelTable kScalar{
    "scalar",
    &scalar_gemm,
    &reference::relu<float>,
    &reference::relu_backward<float>,
    &reference::add_bias<float>,
    &reference::column_sums<float>,
    &scalar_adam,
};

const KernelTable& choose() {
    const char* forced = std::getenv("FLAPRL_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") return kScalar;
    if (const KernelTable* t = avx2_kernels()) return *t;
    return kScalar;
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(FLAPRL_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2::table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        t = &choose();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void set_active_kernels(const KernelTable& table) { g_active.store(&table, std::memory_order_release); }

}  // namespace flaprl::simd
