#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace flaprl::nn {

/// Activation shape of a single sample, stored channel-last (h, w, c).
struct Shape {
    int height = 1;
    int width = 1;
    int channels = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

enum class LayerKind : std::uint8_t { conv2d, dense, relu, sigmoid };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int filters = 0;  // conv2d
    int kernel = 0;   // conv2d, square
    int stride = 1;   // conv2d
    int units = 0;    // dense

    static LayerSpec conv(int filters, int kernel, int stride) {
        return {LayerKind::conv2d, filters, kernel, stride, 0};
    }
    static LayerSpec dense(int units) { return {LayerKind::dense, 0, 0, 1, units}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 1, 0}; }
    static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0, 1, 0}; }

    bool has_parameters() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

    /// Throws DimensionError on non-positive filters/kernel/stride/units.
    void validate() const;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Valid padding: out = floor((in - kernel) / stride) + 1 per spatial axis.
/// Throws DimensionError when the kernel does not fit.
Shape conv_output_shape(Shape input, int kernel, int stride, int filters);

/// Layer chain appended after the trunk; each head yields one output tensor.
struct Head {
    std::string name;
    std::vector<LayerSpec> layers;

    friend bool operator==(const Head&, const Head&) = default;
};

/// Sequential trunk with optional output heads. With no heads the trunk
/// output is the single network output.
struct Architecture {
    Shape input;
    std::vector<LayerSpec> trunk;
    std::vector<Head> heads;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DqnWidths {
    int conv1 = 32;
    int conv2 = 64;
    int conv3 = 32;
    int hidden = 512;

    friend bool operator==(const DqnWidths&, const DqnWidths&) = default;
};

struct A3cWidths {
    int conv1 = 16;
    int conv2 = 32;
    int hidden = 256;

    friend bool operator==(const A3cWidths&, const A3cWidths&) = default;
};

inline constexpr Shape kFrameStackShape{84, 84, 4};

/// Conv(32,8,4) ReLU Conv(64,4,2) ReLU Conv(32,3,1) ReLU Dense(512) ReLU Dense(2).
Architecture dqn_architecture(Shape input = kFrameStackShape, DqnWidths widths = {});

/// Trunk Conv(16,8,4) ReLU Conv(32,4,2) ReLU Dense(256) ReLU, heads
/// "policy" Dense(1) Sigmoid and "value" Dense(1).
Architecture a3c_architecture(Shape input = kFrameStackShape, A3cWidths widths = {});

}  // namespace flaprl::nn
