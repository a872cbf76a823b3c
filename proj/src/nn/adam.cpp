#include "flaprl/nn/adam.hpp"

#include <cmath>

#include "flaprl/error.hpp"
#include "flaprl/simd/kernels.hpp"
#include "flaprl/simd/reference.hpp"

namespace flaprl::nn {

std::pair<double, double> adam_bias_corrections(double beta1, double beta2, std::uint64_t step) {
    const auto t = static_cast<double>(step);
    return {1.0 / (1.0 - std::pow(beta1, t)), 1.0 / (1.0 - std::pow(beta2, t))};
}

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, T learning_rate) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
    }
    for (T g : grads) {
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
    ++state.step_count;
    const auto [c1, c2] = adam_bias_corrections(state.beta1, state.beta2, state.step_count);
    if constexpr (std::is_same_v<T, float>) {
        const simd::AdamCoefficients k{learning_rate, state.beta1, state.beta2, state.epsilon,
                                       static_cast<float>(c1), static_cast<float>(c2)};
        simd::active_kernels().adam(params.data(), grads.data(), state.first_moment.data(),
                                    state.second_moment.data(), params.size(), k);
    } else {
        simd::reference::adam<T>(params.data(), grads.data(), state.first_moment.data(), state.second_moment.data(),
                                 params.size(), learning_rate, state.beta1, state.beta2, state.epsilon,
                                 static_cast<T>(c1), static_cast<T>(c2));
    }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&, float);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&, double);

}  // namespace flaprl::nn
