#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flaprl/a3c.hpp"
#include "flaprl/dqn.hpp"
#include "flaprl/env.hpp"
#include "flaprl/preprocess.hpp"

namespace flaprl::cli {

enum class EnvPreset : std::uint8_t { standard, easy };

struct RunConfig {
    EnvPreset preset = EnvPreset::standard;
    env::GameConfig env{};
    preprocess::PreprocessConfig preprocess{};
    dqn::DqnConfig dqn{};
    a3c::A3cConfig a3c{};
    std::string out = "run";
    /// Record real elapsed milliseconds in metrics; off keeps CSVs reproducible.
    bool wall_clock = false;
    /// Keep every checkpoint as checkpoint_<step>.bin instead of replacing checkpoint.bin.
    bool keep_checkpoints = false;
    std::uint64_t eval_max_steps = 10'000;

    /// Applies one seed to both trainers.
    void set_seed(std::uint64_t seed);

    /// Copies preprocess settings into both trainer configs and validates
    /// everything. Throws ConfigError.
    void finalize();

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses `key = value` lines. `#` starts a comment. env.preset is applied
/// before any explicit env.* key regardless of order. Unknown or repeated
/// keys and malformed values throw ConfigError naming the key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Every key, one per line, in a fixed order.
std::string serialize_config(const RunConfig& config);

/// All accepted keys.
std::vector<std::string> config_keys();

}  // namespace flaprl::cli
