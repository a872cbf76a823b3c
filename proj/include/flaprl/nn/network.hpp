#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flaprl/nn/layers.hpp"

namespace flaprl::nn {

template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> values;
};

/// Resolved layer: shapes and where its parameters live in the flat buffer.
struct LayerPlan {
    LayerSpec spec;
    Shape in;
    Shape out;
    int head = -1;     // -1 for trunk layers
    std::string name;  // parametric layers only
    std::size_t weight_offset = 0;
    std::size_t weight_count = 0;
    std::size_t bias_offset = 0;
    std::size_t bias_count = 0;
    /// conv: {filters, kernel, kernel, in_channels}; dense: {units, inputs}.
    std::vector<std::uint32_t> weight_dims;

    friend bool operator==(const LayerPlan&, const LayerPlan&) = default;
};

/// Builds the layer plan. Throws DimensionError for incompatible specs.
std::vector<LayerPlan> plan_architecture(const Architecture& arch);

/// Parameters of a fixed architecture held in one contiguous buffer, layer
/// by layer in plan order, weights before biases. Conv weights are laid out
/// (filter, ky, kx, channel); dense weights (unit, input).
template <class T>
class Network {
public:
    using value_type = T;

    explicit Network(Architecture arch);

    const Architecture& architecture() const { return arch_; }
    const std::vector<LayerPlan>& plan() const { return plan_; }

    std::span<T> parameters() { return params_; }
    std::span<const T> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<T> weights(std::size_t layer);
    std::span<const T> weights(std::size_t layer) const;
    std::span<T> bias(std::size_t layer);
    std::span<const T> bias(std::size_t layer) const;

    int head_count() const { return arch_.heads.empty() ? 1 : static_cast<int>(arch_.heads.size()); }
    std::size_t input_size() const { return arch_.input.size(); }
    std::size_t output_size(int head) const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    Architecture arch_;
    std::vector<LayerPlan> plan_;
    std::vector<T> params_;
};

/// Shape-congruent with Network::parameters().
template <class T>
struct Gradients {
    std::vector<T> values;

    Gradients() = default;
    explicit Gradients(std::size_t n) : values(n, T(0)) {}
};

/// Everything backward() needs from a forward pass.
template <class T>
struct ForwardCache {
    std::size_t parameter_count = 0;
    std::size_t layer_count = 0;
    int batch = 0;
    std::vector<T> input;
    std::vector<std::vector<T>> outputs;  // per layer, batch-major
    std::vector<std::vector<T>> patches;  // im2col rows for conv layers
    std::vector<std::vector<T>> scratch;  // backward workspace
};

template <class T>
struct ForwardResult {
    std::vector<Tensor<T>> outputs;  // one per head, shape {batch, units}
    ForwardCache<T> cache;
};

template <class T>
struct BackwardResult {
    Gradients<T> gradients;
    std::vector<T> input_gradient;
};

/// Runs `batch` samples laid out back to back. Throws DimensionError on a
/// size mismatch and NumericError if any output is non-finite.
template <class T>
ForwardResult<T> forward(const Network<T>& net, std::span<const T> input, int batch = 1);

/// Allocation-reusing form; outputs are read with head_output().
template <class T>
void forward_into(const Network<T>& net, std::span<const T> input, int batch, ForwardCache<T>& cache);

template <class T>
std::span<const T> head_output(const Network<T>& net, const ForwardCache<T>& cache, int head);

/// Exact gradients of the scalar loss whose derivatives with respect to
/// each head output are `output_gradients` (one span per head).
template <class T>
BackwardResult<T> backward(const Network<T>& net, ForwardCache<T>& cache,
                           const std::vector<std::span<const T>>& output_gradients);

/// Writes parameter gradients into `grads` (resized as needed). The input
/// gradient is computed only when `input_gradient` is non-null.
template <class T>
void backward_into(const Network<T>& net, ForwardCache<T>& cache,
                   const std::vector<std::span<const T>>& output_gradients, Gradients<T>& grads,
                   std::vector<T>* input_gradient);

/// Weights uniform in [-sqrt(6/fan_in), +sqrt(6/fan_in)], drawn layer by
/// layer in plan order from Rng(seed); biases zero.
template <class T>
Network<T> init_network(const Architecture& arch, std::uint64_t seed);

template <class To, class From>
Network<To> convert(const Network<From>& net) {
    Network<To> out(net.architecture());
    auto src = net.parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
    return out;
}

extern template class Network<float>;
extern template class Network<double>;

}  // namespace flaprl::nn
