#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace flaprl::nn {

template <class T>
struct AdamState {
    std::vector<T> first_moment;
    std::vector<T> second_moment;
    std::uint64_t step_count = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    AdamState() = default;
    explicit AdamState(std::size_t n) : first_moment(n, T(0)), second_moment(n, T(0)) {}

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam. Increments step_count. Throws DimensionError on
/// size mismatch and NumericError if any gradient is non-finite; parameters
/// are left untouched on error.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, T learning_rate);

/// Bias-correction factors (1/(1-beta1^t), 1/(1-beta2^t)) for step t >= 1.
std::pair<double, double> adam_bias_corrections(double beta1, double beta2, std::uint64_t step);

}  // namespace flaprl::nn
