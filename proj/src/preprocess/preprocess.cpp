#include "flaprl/preprocess.hpp"

#include <string>
#include <vector>

#include "flaprl/error.hpp"

namespace flaprl::preprocess {

namespace {

void check_plane(const Frame& f) {
    if (f.width != kSide || f.height != kSide) {
        throw DimensionError("frame stack planes must be 84x84, got " + std::to_string(f.width) + "x" +
                             std::to_string(f.height));
    }
}

template <class T>
void write_planes(const std::array<Frame, kDepth>& planes, std::span<T> out) {
    if (out.size() != static_cast<std::size_t>(kStackSize)) {
        throw DimensionError("stack tensor needs 84*84*4 elements");
    }
    for (int c = 0; c < kDepth; ++c) {
        const auto& src = planes[static_cast<std::size_t>(c)].intensities;
        for (int i = 0; i < kPlaneSize; ++i) out[static_cast<std::size_t>(i) * kDepth + c] = src[i];
    }
}

}  // namespace

Frame downsample(const Frame& frame, int tw, int th) {
    if (tw <= 0 || th <= 0 || frame.width < tw || frame.height < th) {
        throw DimensionError("downsample source " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                             " is smaller than target " + std::to_string(tw) + "x" + std::to_string(th));
    }
    std::vector<int> xs(static_cast<std::size_t>(tw) + 1);
    for (int i = 0; i <= tw; ++i) xs[i] = static_cast<int>(static_cast<long>(i) * frame.width / tw);

    Frame out(tw, th);
    std::vector<double> column_sums(static_cast<std::size_t>(tw));
    for (int ty = 0; ty < th; ++ty) {
        const int y0 = static_cast<int>(static_cast<long>(ty) * frame.height / th);
        const int y1 = static_cast<int>(static_cast<long>(ty + 1) * frame.height / th);
        std::fill(column_sums.begin(), column_sums.end(), 0.0);
        for (int y = y0; y < y1; ++y) {
            const float* row = frame.intensities.data() + static_cast<std::size_t>(y) * frame.width;
            for (int tx = 0; tx < tw; ++tx) {
                double s = 0.0;
                for (int x = xs[tx]; x < xs[tx + 1]; ++x) s += row[x];
                column_sums[tx] += s;
            }
        }
        for (int tx = 0; tx < tw; ++tx) {
            const double area = static_cast<double>(xs[tx + 1] - xs[tx]) * (y1 - y0);
            out.at(tx, ty) = static_cast<float>(column_sums[tx] / area);
        }
    }
    return out;
}

Frame threshold(const Frame& frame, float cutoff) {
    Frame out = frame;
    for (float& v : out.intensities) v = v > cutoff ? 1.0f : 0.0f;
    return out;
}

FrameStack FrameStack::reset(const Frame& initial) {
    check_plane(initial);
    FrameStack s;
    s.planes_.fill(initial);
    return s;
}

FrameStack FrameStack::push(const Frame& frame) const {
    check_plane(frame);
    FrameStack s;
    for (int i = 0; i + 1 < kDepth; ++i) s.planes_[i] = planes_[i + 1];
    s.planes_.back() = frame;
    return s;
}

void FrameStack::write_hwc(std::span<float> out) const { write_planes(planes_, out); }
void FrameStack::write_hwc(std::span<double> out) const { write_planes(planes_, out); }

FrameStack stack_reset(const Frame& initial) { return FrameStack::reset(initial); }
FrameStack stack_push(const FrameStack& stack, const Frame& frame) { return stack.push(frame); }

Frame process(const Frame& raw, const PreprocessConfig& config) {
    Frame small = downsample(raw);
    return config.binarize ? threshold(small, config.cutoff) : small;
}

}  // namespace flaprl::preprocess
