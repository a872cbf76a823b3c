#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "flaprl/env.hpp"
#include "flaprl/metrics.hpp"
#include "flaprl/nn/adam.hpp"
#include "flaprl/nn/network.hpp"
#include "flaprl/preprocess.hpp"
#include "flaprl/rng.hpp"

namespace flaprl::a3c {

using env::Action;

enum class SharingMode : std::uint8_t { serialized, relaxed };

struct A3cConfig {
    int workers = 16;
    int episodes_per_round = 5;
    int t_max = 5;
    double gamma = 0.99;
    double learning_rate = 1e-4;
    double value_loss_coeff = 0.5;
    double entropy_coeff = 0.01;
    std::uint64_t total_episodes = 9500;
    std::uint64_t seed = 0;
    SharingMode sharing = SharingMode::serialized;
    /// Checkpoint the shared parameters after every this many rounds (0 = never).
    std::uint64_t checkpoint_every_rounds = 1;
    /// Episodes reaching this many steps are cut off and bootstrapped. 0 = no cap.
    std::uint64_t max_episode_steps = 0;  // in game ticks; 0 = no cap
    int frame_skip = 1;                    // game ticks per agent action
    double max_grad_norm = 0.0;            // global L2 clip per update; 0 = off
    nn::A3cWidths widths{};
    preprocess::PreprocessConfig preprocess{};

    int episodes_per_round_total() const { return workers * episodes_per_round; }

    /// Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const A3cConfig&, const A3cConfig&) = default;
};

/// Flap with probability p. Throws NumericError unless 0 < p < 1.
Action sample_action(double flap_probability, Rng& rng);

/// Rescales `grads` in place so their L2 norm is at most `max_norm`.
void clip_global_norm(std::span<float> grads, double max_norm);

/// Up to t_max steps of one worker's experience.
struct Rollout {
    std::vector<float> states;  // one 84x84x4 channel-last tensor per step
    std::vector<Action> actions;
    std::vector<double> rewards;
    std::vector<double> values;
    double bootstrap_value = 0.0;  // 0 when the segment ended terminal

    std::size_t size() const { return actions.size(); }
};

/// R_t = r_t + gamma * R_{t+1}, seeded with the bootstrap value.
std::vector<double> compute_returns(const Rollout& rollout, double gamma);
std::vector<double> compute_returns(std::span<const double> rewards, double bootstrap_value, double gamma);

struct A3cLoss {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;              // summed over the segment
    std::vector<double> policy_grad;   // d total / d p_t
    std::vector<double> value_grad;    // d total / d V_t
};

/// Advantages are treated as constants in the policy term. Throws
/// NumericError if any probability is not strictly inside (0, 1).
A3cLoss a3c_loss(std::span<const Action> actions, std::span<const double> returns,
                 std::span<const double> policy_outputs, std::span<const double> value_outputs,
                 double value_loss_coeff, double entropy_coeff);

inline double bernoulli_entropy(double p) {
    return -(p * std::log(std::max(p, 1e-12)) + (1 - p) * std::log(std::max(1 - p, 1e-12)));
}

/// Global network, its Adam state and the update counter.
class SharedParams {
public:
    SharedParams(nn::Network<float> net, SharingMode mode);

    SharingMode mode() const { return mode_; }

    /// Copies the shared parameters into `local` (same architecture).
    void snapshot(nn::Network<float>& local) const;

    /// One Adam step with the given gradients; returns the new global step.
    std::uint64_t apply(std::span<const float> grads, float learning_rate);

    /// Parameter copy. Consistent in serialized mode; element-wise in relaxed mode.
    nn::Network<float> copy() const;

    std::uint64_t global_step() const { return step_.load(); }

private:
    nn::Network<float> net_;
    nn::AdamState<float> adam_;
    SharingMode mode_;
    mutable std::mutex mutex_;
    std::atomic<std::uint64_t> step_{0};
    std::atomic<std::uint64_t> adam_step_{0};
};

/// Per-worker state that persists across rounds.
struct Worker {
    Worker(int id, const nn::Architecture& arch, std::uint64_t run_seed);

    int id;
    Rng rng;
    std::uint64_t env_seed_base;
    std::uint64_t episodes = 0;  // finished, across rounds
    std::uint64_t env_steps = 0;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    nn::Network<float> local;
    nn::ForwardCache<float> act_cache;
    nn::ForwardCache<float> batch_cache;
    nn::Gradients<float> grads;
};

/// Seed of worker `id`'s streams: mix64(seed + id).
std::uint64_t worker_seed(std::uint64_t seed, int id);

struct RoundStats {
    int episodes = 0;
    std::uint64_t env_steps = 0;
    std::uint64_t updates = 0;
};

/// Plays cfg.episodes_per_round full episodes, refreshing the local network
/// before every segment and pushing one update per segment. `stop` (optional)
/// ends the round early between segments.
RoundStats worker_round(Worker& worker, SharedParams& shared, const env::GameConfig& game, const A3cConfig& cfg,
                        const MetricsSink& metrics, const std::atomic<bool>* stop = nullptr);

struct A3cResult {
    nn::Network<float> network;
    std::uint64_t rounds = 0;
    std::uint64_t episodes = 0;
    std::uint64_t updates = 0;
    std::uint64_t env_steps = 0;
};

/// Rounds of cfg.workers concurrent workers until at least total_episodes
/// episodes have finished. Metrics rows are delivered one at a time under a
/// lock; checkpoints are taken between rounds.
A3cResult run_a3c(const env::GameConfig& game, const A3cConfig& cfg, const MetricsSink& metrics,
                  const CheckpointSink& checkpoints);

/// Environment steps per second with cfg.workers workers training
/// continuously for `window`.
double measure_throughput(const env::GameConfig& game, const A3cConfig& cfg, std::chrono::duration<double> window);

}  // namespace flaprl::a3c
