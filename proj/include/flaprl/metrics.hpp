#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "flaprl/nn/network.hpp"

namespace flaprl {

enum class Algorithm : std::uint8_t { dqn = 0, a3c = 1 };

inline const char* algorithm_name(Algorithm a) { return a == Algorithm::dqn ? "dqn" : "a3c"; }

/// One finished episode.
struct MetricsRow {
    Algorithm algo = Algorithm::dqn;
    std::uint64_t step = 0;     // global step when the episode ended
    int worker = -1;            // -1 for DQN
    std::uint64_t episode = 0;  // per-worker index for A3C
    int score = 0;
    std::uint64_t length = 0;
    double aux = 0.0;  // epsilon (DQN) or mean loss (A3C)
    double wall_ms = 0.0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

using MetricsSink = std::function<void(const MetricsRow&)>;
using CheckpointSink = std::function<void(std::uint64_t step, const nn::Network<float>&)>;

}  // namespace flaprl
