#pragma once

#include <array>
#include <span>

#include "flaprl/env.hpp"

namespace flaprl::preprocess {

using env::Frame;

inline constexpr int kSide = 84;
inline constexpr int kDepth = 4;
inline constexpr int kPlaneSize = kSide * kSide;
inline constexpr int kStackSize = kPlaneSize * kDepth;

/// Area-average pooling onto a target grid. Each target pixel averages the
/// integer source box [floor(i*W/w), floor((i+1)*W/w)) in both axes.
Frame downsample(const Frame& frame, int target_width = kSide, int target_height = kSide);

/// value > cutoff -> 1, else 0.
Frame threshold(const Frame& frame, float cutoff);

/// Four 84x84 planes, oldest first.
class FrameStack {
public:
    /// Every plane is a copy of `initial`.
    static FrameStack reset(const Frame& initial);

    /// New stack with the oldest plane dropped and `frame` appended.
    FrameStack push(const Frame& frame) const;

    const Frame& plane(int i) const { return planes_[static_cast<std::size_t>(i)]; }
    const Frame& newest() const { return planes_.back(); }

    /// Writes the stack as an 84x84x4 channel-last tensor (channel = plane index).
    void write_hwc(std::span<float> out) const;
    void write_hwc(std::span<double> out) const;

    friend bool operator==(const FrameStack&, const FrameStack&) = default;

private:
    std::array<Frame, kDepth> planes_;
};

FrameStack stack_reset(const Frame& initial);
FrameStack stack_push(const FrameStack& stack, const Frame& frame);

struct PreprocessConfig {
    float cutoff = 0.25f;
    /// false keeps the averaged intensities (no binarization).
    bool binarize = true;

    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// downsample -> threshold for a single raw environment frame.
Frame process(const Frame& raw, const PreprocessConfig& config);

}  // namespace flaprl::preprocess
