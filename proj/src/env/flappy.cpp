#include <algorithm>
#include <cmath>
#include <string>

#include "flaprl/env.hpp"
#include "flaprl/error.hpp"

namespace flaprl::env {

namespace {

void require(bool ok, const char* invariant) {
    if (!ok) throw ConfigError(std::string("invalid game config: ") + invariant);
}

int draw_gap_center(const GameConfig& c, Rng& rng) {
    const auto span = static_cast<std::uint64_t>(c.gap_center_max - c.gap_center_min + 1);
    return c.gap_center_min + static_cast<int>(rng.below(span));
}

bool collides(const GameConfig& c, const GameState& s) {
    const double top = s.bird_y;
    const double bottom = s.bird_y + c.bird_size;
    if (top < 0.0 || bottom > c.screen_height) return true;
    const double left = c.bird_x;
    const double right = c.bird_x + c.bird_size;
    const double half_gap = c.pipe_gap / 2.0;
    for (const Pipe& p : s.pipes) {
        if (p.x >= right) break;
        if (p.x + c.pipe_width <= left) continue;
        if (top < p.gap_center - half_gap || bottom > p.gap_center + half_gap) return true;
    }
    return false;
}

// Pixel (col,row) is covered by [x0,x1) x [y0,y1) when its center is inside.
void fill_rect(Frame& f, double x0, double x1, double y0, double y1, float value) {
    const int c0 = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)));
    const int c1 = std::min(f.width, static_cast<int>(std::ceil(x1 - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)));
    const int r1 = std::min(f.height, static_cast<int>(std::ceil(y1 - 0.5)));
    for (int r = r0; r < r1; ++r) {
        float* row = f.intensities.data() + static_cast<std::size_t>(r) * f.width;
        std::fill(row + c0, row + std::max(c0, c1), value);
    }
}

}  // namespace

void GameConfig::validate() const {
    require(screen_width > 0, "screen_width > 0");
    require(screen_height > 0, "screen_height > 0");
    require(bird_x > 0, "bird_x > 0");
    require(bird_size > 0, "bird_size > 0");
    require(gravity > 0.0, "gravity > 0");
    require(flap_impulse < 0.0, "flap_impulse < 0");
    require(max_fall_speed > 0.0, "max_fall_speed > 0");
    require(pipe_speed > 0.0, "pipe_speed > 0");
    require(pipe_gap > 0, "pipe_gap > 0");
    require(pipe_spacing > 0, "pipe_spacing > 0");
    require(pipe_width > 0, "pipe_width > 0");
    require(gap_center_min > 0, "gap_center_min > 0");
    require(gap_center_max > 0, "gap_center_max > 0");
    require(pipe_gap > bird_size, "pipe_gap > bird_size");
    require(2 * gap_center_min >= pipe_gap, "gap_center_min >= pipe_gap/2");
    require(2 * gap_center_max <= 2 * screen_height - pipe_gap,
            "gap_center_max <= screen_height - pipe_gap/2");
    require(gap_center_min <= gap_center_max, "gap_center_min <= gap_center_max");
    require(bird_x + bird_size <= screen_width, "bird_x + bird_size <= screen_width");
    require(bird_size < screen_height, "bird_size < screen_height");
    require(pipe_spacing > pipe_width, "pipe_spacing > pipe_width");
}

int pipe_count(const GameConfig& c) {
    return (c.screen_width + c.pipe_width + c.pipe_spacing - 1) / c.pipe_spacing + 1;
}

std::pair<GameState, Frame> reset(const GameConfig& config, std::uint64_t seed) {
    config.validate();
    GameState s;
    s.rng = Rng(seed);
    s.bird_y = (config.screen_height - config.bird_size) / 2.0;
    const int n = pipe_count(config);
    s.pipes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Pipe p;
        p.x = static_cast<double>(config.screen_width) + static_cast<double>(i) * config.pipe_spacing;
        p.gap_center = draw_gap_center(config, s.rng);
        s.pipes.push_back(p);
    }
    Frame f = render(s, config);
    return {std::move(s), std::move(f)};
}

StepResult advance(const GameConfig& config, GameState& s, Action action) {
    if (s.terminal) throw EpisodeFinishedError("step called on a finished episode");

    if (action == Action::Flap) {
        s.bird_vy = config.flap_impulse;
    } else {
        s.bird_vy = std::min(s.bird_vy + config.gravity, config.max_fall_speed);
    }
    s.bird_y += s.bird_vy;

    for (Pipe& p : s.pipes) p.x -= config.pipe_speed;
    if (s.pipes.front().x + config.pipe_width < 0.0) {
        Pipe recycled = s.pipes.front();
        recycled.x = s.pipes.back().x + config.pipe_spacing;
        recycled.gap_center = draw_gap_center(config, s.rng);
        recycled.passed = false;
        std::rotate(s.pipes.begin(), s.pipes.begin() + 1, s.pipes.end());
        s.pipes.back() = recycled;
    }
    ++s.tick;

    StepResult out;
    if (collides(config, s)) {
        s.terminal = true;
        out.reward = -1.0f;
    } else {
        for (Pipe& p : s.pipes) {
            if (!p.passed && p.x + config.pipe_width < config.bird_x) {
                p.passed = true;
                ++s.score;
                out.reward = 1.0f;
            }
        }
    }
    out.terminal = s.terminal;
    out.score = s.score;
    return out;
}

StepResult step(const GameConfig& config, GameState& s, Action action) {
    StepResult out = advance(config, s, action);
    out.frame = render(s, config);
    return out;
}

StepResult step_repeated(const GameConfig& config, GameState& s, Action action, int ticks) {
    if (ticks < 1) throw ConfigError("frame skip must be at least 1");
    StepResult out;
    out.ticks = 0;
    bool passed = false;
    for (int i = 0; i < ticks; ++i) {
        const StepResult r = advance(config, s, action);
        ++out.ticks;
        passed = passed || r.reward > 0.0f;
        out.terminal = r.terminal;
        out.score = r.score;
        if (r.terminal) break;
    }
    out.reward = out.terminal ? -1.0f : (passed ? 1.0f : 0.0f);
    out.frame = render(s, config);
    return out;
}

Frame render(const GameState& s, const GameConfig& c) {
    Frame f(c.screen_width, c.screen_height, kBackground);
    const double half_gap = c.pipe_gap / 2.0;
    for (const Pipe& p : s.pipes) {
        if (p.x >= c.screen_width || p.x + c.pipe_width <= 0.0) continue;
        fill_rect(f, p.x, p.x + c.pipe_width, 0.0, p.gap_center - half_gap, kPipe);
        fill_rect(f, p.x, p.x + c.pipe_width, p.gap_center + half_gap, c.screen_height, kPipe);
    }
    fill_rect(f, c.bird_x, c.bird_x + c.bird_size, s.bird_y, s.bird_y + c.bird_size, kBird);
    return f;
}

Action oracle_action(const GameConfig&, const GameState& s) {
    for (const Pipe& p : s.pipes) {
        if (!p.passed) return s.bird_y > p.gap_center ? Action::Flap : Action::NoFlap;
    }
    return Action::NoFlap;
}

}  // namespace flaprl::env
