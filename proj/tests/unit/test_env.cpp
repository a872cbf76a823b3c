#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "flaprl/env.hpp"
#include "flaprl/error.hpp"

using namespace flaprl;
using namespace flaprl::env;

namespace {

int count_value(const Frame& f, float v) {
    return static_cast<int>(std::count(f.intensities.begin(), f.intensities.end(), v));
}

// Moves every pipe far off-screen to the right so only the bird is drawn.
GameState bird_only_state(const GameConfig& c) {
    auto [s, f] = reset(c, 1);
    for (std::size_t i = 0; i < s.pipes.size(); ++i) s.pipes[i].x = 10000.0 + 200.0 * static_cast<double>(i);
    return s;
}

}  // namespace

TEST_CASE("reset is deterministic and starts a fresh episode") {
    const GameConfig c;
    auto [s1, f1] = reset(c, 7);
    auto [s2, f2] = reset(c, 7);
    CHECK(s1 == s2);
    CHECK(f1 == f2);
    CHECK(s1.score == 0);
    CHECK_FALSE(s1.terminal);
    CHECK(s1.tick == 0);
    CHECK(s1.bird_vy == 0.0);
    CHECK(s1.bird_y == doctest::Approx((c.screen_height - c.bird_size) / 2.0));
    CHECK(static_cast<int>(s1.pipes.size()) == pipe_count(c));
    for (const Pipe& p : s1.pipes) {
        CHECK(p.x > c.bird_x);
        CHECK(p.gap_center >= c.gap_center_min);
        CHECK(p.gap_center <= c.gap_center_max);
    }
    auto [s3, f3] = reset(c, 8);
    CHECK_FALSE(s1 == s3);
}

TEST_CASE("noflap trajectories replay byte for byte") {
    const GameConfig c;
    auto run = [&] {
        auto [s, f] = reset(c, 7);
        std::vector<Frame> frames{f};
        std::vector<GameState> states{s};
        for (int i = 0; i < 100 && !s.terminal; ++i) {
            frames.push_back(step(c, s, Action::NoFlap).frame);
            states.push_back(s);
        }
        return std::make_pair(states, frames);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("invalid configs name the violated invariant") {
    GameConfig c;
    c.pipe_gap = c.bird_size;
    CHECK_THROWS_WITH_AS(reset(c, 1), doctest::Contains("pipe_gap > bird_size"), ConfigError);
    c = GameConfig{};
    c.flap_impulse = 2.0;
    CHECK_THROWS_WITH_AS(reset(c, 1), doctest::Contains("flap_impulse"), ConfigError);
    c = GameConfig{};
    c.gap_center_min = 10;
    CHECK_THROWS_WITH_AS(reset(c, 1), doctest::Contains("gap_center_min"), ConfigError);
    c = GameConfig{};
    c.gap_center_max = c.screen_height - 10;
    CHECK_THROWS_WITH_AS(reset(c, 1), doctest::Contains("gap_center_max"), ConfigError);
    c = GameConfig{};
    c.gravity = 0.0;
    CHECK_THROWS_AS(reset(c, 1), ConfigError);
    CHECK_NOTHROW(GameConfig::easy().validate());
}

TEST_CASE("physics order: flap sets velocity, gravity accumulates and clamps") {
    const GameConfig c;
    GameState s = bird_only_state(c);
    const double y0 = s.bird_y;
    step(c, s, Action::Flap);
    CHECK(s.bird_vy == c.flap_impulse);
    CHECK(s.bird_y == y0 + c.flap_impulse);
    step(c, s, Action::NoFlap);
    CHECK(s.bird_vy == c.flap_impulse + c.gravity);
    s.bird_vy = c.max_fall_speed;
    s.bird_y = 100;
    step(c, s, Action::NoFlap);
    CHECK(s.bird_vy == c.max_fall_speed);
    CHECK(s.bird_y == 100 + c.max_fall_speed);
}

TEST_CASE("passing a pipe's trailing edge pays +1") {
    const GameConfig c;
    auto [s, f] = reset(c, 3);
    Pipe& p = s.pipes.front();
    // Trailing edge sits exactly on bird_x; one scroll moves it past.
    p.x = c.bird_x - c.pipe_width;
    p.passed = false;
    s.bird_y = p.gap_center - c.bird_size / 2.0;
    s.bird_vy = -c.gravity;  // next NoFlap leaves the bird in place
    const StepResult r = step(c, s, Action::NoFlap);
    CHECK(r.reward == 1.0f);
    CHECK(r.score == 1);
    CHECK_FALSE(r.terminal);
    CHECK(s.pipes.front().passed);
}

TEST_CASE("hitting the ceiling ends the episode with -1") {
    const GameConfig c;
    GameState s = bird_only_state(c);
    s.bird_y = 0.0;
    const StepResult r = step(c, s, Action::Flap);
    CHECK(r.reward == -1.0f);
    CHECK(r.terminal);
    CHECK(s.terminal);
    CHECK_THROWS_AS(step(c, s, Action::NoFlap), EpisodeFinishedError);
}

TEST_CASE("hitting a pipe ends the episode and death beats the pass check") {
    const GameConfig c;
    auto [s, f] = reset(c, 3);
    Pipe& p = s.pipes.front();
    p.x = c.bird_x;  // overlapping the bird
    s.bird_y = p.gap_center - c.pipe_gap / 2.0 - 5.0;
    s.bird_vy = -c.gravity;
    const StepResult r = step(c, s, Action::NoFlap);
    CHECK(r.terminal);
    CHECK(r.reward == -1.0f);
    CHECK(r.score == 0);
}

TEST_CASE("plain survival pays nothing") {
    const GameConfig c;
    auto [s, f] = reset(c, 11);
    const StepResult r = step(c, s, Action::NoFlap);
    CHECK(r.reward == 0.0f);
    CHECK_FALSE(r.terminal);
}

TEST_CASE("render draws only the bird when no pipe is on screen") {
    const GameConfig c;
    const GameState s = bird_only_state(c);
    const Frame f = render(s, c);
    CHECK(f.width == c.screen_width);
    CHECK(f.height == c.screen_height);
    CHECK(count_value(f, kBird) == c.bird_size * c.bird_size);
    CHECK(count_value(f, kBackground) == c.screen_width * c.screen_height - c.bird_size * c.bird_size);
    CHECK(render(s, c) == f);
}

TEST_CASE("render uses a three-tone palette and clips to the screen") {
    const GameConfig c;
    auto [s, f] = reset(c, 5);
    Rng rng(99);
    bool saw_pipe = false;
    while (!s.terminal && s.tick < 300) {
        const StepResult r = step(c, s, rng.bernoulli(0.1) ? Action::Flap : Action::NoFlap);
        for (float v : r.frame.intensities) {
            REQUIRE((v == kBackground || v == kPipe || v == kBird));
        }
        saw_pipe = saw_pipe || count_value(r.frame, kPipe) > 0;
        CHECK(r.frame.intensities.size() == static_cast<std::size_t>(c.screen_width * c.screen_height));
    }
    CHECK(saw_pipe);
}

TEST_CASE("episode properties: reward accounting, pipe conservation, ordering") {
    for (const GameConfig& c : {GameConfig::standard(), GameConfig::easy()}) {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            auto [s, f] = reset(c, seed);
            Rng policy(seed + 1000);
            const std::size_t pipes = s.pipes.size();
            const double flap_p = seed % 2 == 0 ? 0.1 : 0.5;
            int positive = 0;
            int negative = 0;
            while (!s.terminal) {
                const Action a = (seed % 4 == 3) ? oracle_action(c, s)
                                                 : (policy.bernoulli(flap_p) ? Action::Flap : Action::NoFlap);
                const StepResult r = advance(c, s, a);
                if (r.reward > 0) ++positive;
                if (r.reward < 0) {
                    ++negative;
                    CHECK(r.terminal);
                }
                CHECK(s.pipes.size() == pipes);
                CHECK(std::is_sorted(s.pipes.begin(), s.pipes.end(),
                                     [](const Pipe& a, const Pipe& b) { return a.x < b.x; }));
                if (s.tick > 5000) break;
            }
            CHECK(positive == s.score);
            if (s.terminal) CHECK(negative == 1);
        }
    }
}

TEST_CASE("passed flags account for every point scored on live pipes") {
    // Recycled pipes reset their flag, so live passed flags never exceed score
    // and every pass is visible until the pipe leaves the screen.
    const GameConfig c;
    auto [s, f] = reset(c, 21);
    int last_score = 0;
    while (!s.terminal && s.score < 15) {
        advance(c, s, oracle_action(c, s));
        const auto live_passed =
            std::count_if(s.pipes.begin(), s.pipes.end(), [](const Pipe& p) { return p.passed; });
        CHECK(live_passed <= s.score);
        if (s.score > last_score) {
            CHECK(live_passed >= 1);
            last_score = s.score;
        }
    }
}

TEST_CASE("oracle controller proves the default game is winnable") {
    const GameConfig c;
    double total = 0;
    const int episodes = 20;
    for (int seed = 0; seed < episodes; ++seed) {
        auto [s, f] = reset(c, static_cast<std::uint64_t>(seed));
        while (!s.terminal && s.score < 200) advance(c, s, oracle_action(c, s));
        total += s.score;
    }
    CHECK(total / episodes >= 10.0);

    auto [s, f] = reset(c, 7);
    while (!s.terminal && s.score < 10) advance(c, s, oracle_action(c, s));
    CHECK(s.score >= 10);
}

TEST_CASE("rng streams are reproducible and bounded") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(0);
    for (int i = 0; i < 10000; ++i) {
        const double u = c.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(c.below(7) < 7);
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("repeated steps match single ticks and merge rewards") {
    const GameConfig c;
    for (int ticks : {1, 2, 3, 5}) {
        auto [a, fa] = reset(c, 31);
        auto [b, fb] = reset(c, 31);
        while (!a.terminal) {
            const Action act = oracle_action(c, a);
            const StepResult r = step_repeated(c, a, act, ticks);
            StepResult last;
            float expect = 0.0f;
            int played = 0;
            for (int i = 0; i < ticks && !b.terminal; ++i) {
                last = step(c, b, act);
                ++played;
                if (last.reward > 0) expect = 1.0f;
            }
            if (last.terminal) expect = -1.0f;
            REQUIRE(a == b);
            REQUIRE(r.frame == last.frame);
            REQUIRE(r.ticks == played);
            REQUIRE(r.reward == expect);
            REQUIRE(r.terminal == last.terminal);
            REQUIRE(r.score == b.score);
            if (a.tick > 3000) break;
        }
    }
    GameState s = bird_only_state(c);
    s.bird_y = 5.0;
    const StepResult r = step_repeated(c, s, Action::Flap, 4);
    CHECK(r.terminal);
    CHECK(r.ticks == 1);
    CHECK(r.reward == -1.0f);
    GameState t = bird_only_state(c);
    CHECK_THROWS_AS(step_repeated(c, t, Action::NoFlap, 0), ConfigError);
}
