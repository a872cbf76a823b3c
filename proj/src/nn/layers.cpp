#include "flaprl/nn/layers.hpp"

#include <string>

#include "flaprl/error.hpp"

namespace flaprl::nn {

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::conv2d:
            if (filters < 1 || kernel < 1 || stride < 1) {
                throw DimensionError("conv2d needs filters, kernel and stride >= 1");
            }
            break;
        case LayerKind::dense:
            if (units < 1) throw DimensionError("dense needs output_units >= 1");
            break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
            break;
    }
}

Shape conv_output_shape(Shape input, int kernel, int stride, int filters) {
    if (kernel < 1 || stride < 1 || filters < 1) {
        throw DimensionError("conv2d needs filters, kernel and stride >= 1");
    }
    if (input.height < kernel || input.width < kernel) {
        throw DimensionError("kernel " + std::to_string(kernel) + " larger than input " +
                             std::to_string(input.height) + "x" + std::to_string(input.width));
    }
    return {(input.height - kernel) / stride + 1, (input.width - kernel) / stride + 1, filters};
}

Architecture dqn_architecture(Shape input, DqnWidths w) {
    Architecture a;
    a.input = input;
    a.trunk = {
        LayerSpec::conv(w.conv1, 8, 4), LayerSpec::relu(),          LayerSpec::conv(w.conv2, 4, 2),
        LayerSpec::relu(),              LayerSpec::conv(w.conv3, 3, 1), LayerSpec::relu(),
        LayerSpec::dense(w.hidden),     LayerSpec::relu(),          LayerSpec::dense(2),
    };
    return a;
}

Architecture a3c_architecture(Shape input, A3cWidths w) {
    Architecture a;
    a.input = input;
    a.trunk = {
        LayerSpec::conv(w.conv1, 8, 4), LayerSpec::relu(),      LayerSpec::conv(w.conv2, 4, 2),
        LayerSpec::relu(),              LayerSpec::dense(w.hidden), LayerSpec::relu(),
    };
    a.heads = {
        Head{"policy", {LayerSpec::dense(1), LayerSpec::sigmoid()}},
        Head{"value", {LayerSpec::dense(1)}},
    };
    return a;
}

}  // namespace flaprl::nn
