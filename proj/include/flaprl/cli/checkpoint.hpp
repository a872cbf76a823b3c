#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flaprl/metrics.hpp"
#include "flaprl/nn/network.hpp"

namespace flaprl::cli {

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'A', 'P', 'R', 'L', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Algorithm algo;
    std::uint64_t step;
    nn::Network<float> network;
};

/// Layout (little endian): magic, u32 version, u8 algorithm, u64 step,
/// u32 layer count, then per parametric layer a u16-length name, u32 rank,
/// u32 dims, f32 weights and f32 biases.
std::vector<std::uint8_t> encode_checkpoint(Algorithm algo, std::uint64_t step, const nn::Network<float>& net);

/// Rebuilds the canonical architecture for the algorithm (widths read from
/// the stored dims) and checks every name and dim. Throws CheckpointError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes to a temporary file and renames it into place, so a reader never
/// sees a partial checkpoint. Throws IoError.
void save_checkpoint(const std::string& path, Algorithm algo, std::uint64_t step, const nn::Network<float>& net);

/// Throws IoError if unreadable, CheckpointError if corrupt.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace flaprl::cli
