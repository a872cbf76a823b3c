#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flaprl/rng.hpp"

namespace flaprl::env {

/// Row-major grayscale image with intensities in [0, 1].
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<float> intensities;

    Frame() = default;
    Frame(int w, int h, float fill = 0.0f)
        : width(w), height(h), intensities(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int x, int y) { return intensities[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return intensities[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class Action : std::uint8_t { NoFlap = 0, Flap = 1 };

constexpr int to_index(Action a) noexcept { return static_cast<int>(a); }
constexpr Action action_from_index(int i) noexcept { return i == 0 ? Action::NoFlap : Action::Flap; }

/// Geometry in whole pixels, dynamics in pixels per tick. y grows downward.
struct GameConfig {
    int screen_width = 288;
    int screen_height = 512;
    int bird_x = 57;
    int bird_size = 24;
    double gravity = 1.0;
    double flap_impulse = -9.0;
    double max_fall_speed = 10.0;
    double pipe_speed = 4.0;
    int pipe_gap = 100;
    int pipe_spacing = 144;
    int pipe_width = 52;
    int gap_center_min = 196;
    int gap_center_max = 316;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;

    static GameConfig standard() { return {}; }
    /// Wider gap for short training budgets.
    static GameConfig easy() {
        GameConfig c;
        c.pipe_gap = 160;
        return c;
    }

    friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

struct Pipe {
    double x = 0.0;
    int gap_center = 0;
    bool passed = false;

    friend bool operator==(const Pipe&, const Pipe&) = default;
};

struct GameState {
    double bird_y = 0.0;
    double bird_vy = 0.0;
    std::vector<Pipe> pipes;  // ascending x
    int score = 0;
    std::uint64_t tick = 0;
    bool terminal = false;
    Rng rng;

    friend bool operator==(const GameState&, const GameState&) = default;
};

struct StepResult {
    Frame frame;
    float reward = 0.0f;
    bool terminal = false;
    int score = 0;
    int ticks = 1;  // game ticks covered by this result
};

/// Number of pipe records kept alive for a config; constant for an episode.
int pipe_count(const GameConfig& config);

std::pair<GameState, Frame> reset(const GameConfig& config, std::uint64_t seed);

/// Advances one tick. Throws EpisodeFinishedError if state is terminal.
StepResult step(const GameConfig& config, GameState& state, Action action);

/// Same as step() without producing a frame.
StepResult advance(const GameConfig& config, GameState& state, Action action);

/// Repeats `action` for up to `ticks` ticks, stopping at a terminal tick,
/// and renders only the last one. Reward is -1 on death, otherwise +1 if a
/// pipe was passed during the repeat, otherwise 0.
StepResult step_repeated(const GameConfig& config, GameState& state, Action action, int ticks);

Frame render(const GameState& state, const GameConfig& config);

inline constexpr float kBackground = 0.0f;
inline constexpr float kPipe = 0.5f;
inline constexpr float kBird = 1.0f;

/// Scripted controller: flap while the bird's top edge is below the gap
/// center of the nearest pipe it has not yet passed.
Action oracle_action(const GameConfig& config, const GameState& state);

}  // namespace flaprl::env
