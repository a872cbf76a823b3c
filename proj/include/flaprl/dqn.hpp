#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flaprl/env.hpp"
#include "flaprl/metrics.hpp"
#include "flaprl/nn/adam.hpp"
#include "flaprl/nn/network.hpp"
#include "flaprl/preprocess.hpp"
#include "flaprl/qcore.hpp"
#include "flaprl/rng.hpp"

namespace flaprl::dqn {

using env::Action;
using preprocess::FrameStack;
using qcore::EpsilonSchedule;

struct Transition {
    FrameStack state;
    Action action = Action::NoFlap;
    float reward = 0.0f;
    FrameStack next_state;
    bool terminal = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// bits: one bit per pixel, requires binarized planes (~7 KB per entry).
/// floats: raw planes (~226 KB per entry).
enum class ReplayStorage : std::uint8_t { bits, floats };

/// FIFO of transitions with fixed capacity. Index 0 is the oldest entry.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity, ReplayStorage storage = ReplayStorage::bits);

    /// Appends, evicting the oldest entry when full. `stamp` is an opaque
    /// tag kept alongside (the trainer stores the global step).
    /// Throws ConsistencyError if bit storage is given a non-binary plane.
    void push(const Transition& t, std::uint64_t stamp = 0);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t pushes() const { return pushes_; }
    ReplayStorage storage() const { return storage_; }

    Transition at(std::size_t i) const;
    Action action(std::size_t i) const { return meta_[slot(i)].action; }
    float reward(std::size_t i) const { return meta_[slot(i)].reward; }
    bool terminal(std::size_t i) const { return meta_[slot(i)].terminal; }
    std::uint64_t stamp(std::size_t i) const { return meta_[slot(i)].stamp; }

    /// Writes an 84x84x4 channel-last tensor.
    void write_state(std::size_t i, std::span<float> out) const;
    void write_next_state(std::size_t i, std::span<float> out) const;

private:
    struct Meta {
        Action action;
        float reward;
        bool terminal;
        std::uint64_t stamp;
    };

    std::size_t slot(std::size_t i) const;
    void store(std::size_t slot, int which, const FrameStack& s);
    void load(std::size_t slot, int which, std::span<float> out) const;

    std::size_t capacity_;
    ReplayStorage storage_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;  // slot of the oldest entry
    std::uint64_t pushes_ = 0;
    std::size_t stride_;  // words (bits) or floats per stack
    std::vector<std::uint64_t> bits_;
    std::vector<float> floats_;
    std::vector<Meta> meta_;
};

/// n distinct indices in [0, size), uniform over subsets (Floyd's method).
/// Throws UnderfullBufferError if size < n.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng);

std::vector<Transition> sample_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng);

/// Explores with probability epsilon (uniform action), else the argmax with
/// ties going to NoFlap. Throws NumericError on non-finite q values.
Action select_action(std::span<const float> q_values, double epsilon, Rng& rng);

enum class Loss : std::uint8_t { mse, huber };

struct DqnConfig {
    int batch_size = 32;
    double gamma = 0.99;
    double learning_rate = 1e-4;
    std::size_t replay_capacity = 50'000;
    std::uint64_t checkpoint_every = 1000;
    std::uint64_t observe_steps = 3200;
    std::uint64_t total_steps = 1'500'000;
    std::uint64_t seed = 0;
    EpsilonSchedule epsilon{};
    Loss loss = Loss::mse;
    double huber_delta = 1.0;
    /// Off by default; when on, targets come from a copy synced every
    /// target_sync_every training steps.
    bool target_network = false;
    std::uint64_t target_sync_every = 10'000;
    /// Episodes reaching this many steps are cut off without a terminal
    /// flag. 0 disables the cap.
    std::uint64_t max_episode_steps = 0;  // in game ticks; 0 = no cap
    int frame_skip = 1;                    // game ticks per agent action
    nn::DqnWidths widths{};
    preprocess::PreprocessConfig preprocess{};

    /// Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const DqnConfig&, const DqnConfig&) = default;
};

template <class T>
struct QLoss {
    double loss = 0.0;
    std::vector<T> output_gradient;  // batch x 2
};

/// Mean over the batch of the per-sample loss between targets and the Q
/// value of the taken action. Only taken actions receive gradient.
template <class T>
QLoss<T> q_regression_loss(std::span<const T> q_values, std::span<const Action> actions, std::span<const T> targets,
                           Loss loss = Loss::mse, double huber_delta = 1.0);

/// Network, optimizer state and scratch for minibatch updates.
class Learner {
public:
    Learner(const DqnConfig& config, nn::Network<float> net);

    /// One Adam step on the given transitions; returns the loss before the
    /// update. Throws NumericError on a non-finite loss.
    double train_step(std::span<const Transition> batch);
    double train_step(const ReplayBuffer& buffer, std::span<const std::size_t> indices);

    /// Q values for one stacked state (84x84x4 channel-last).
    std::span<const float> q_values(std::span<const float> state);

    /// Targets used by the most recent train_step.
    const std::vector<float>& last_targets() const { return targets_; }

    const nn::Network<float>& network() const { return net_; }
    const nn::AdamState<float>& adam() const { return adam_; }
    std::uint64_t updates() const { return updates_; }

private:
    double update(int batch);

    DqnConfig config_;
    nn::Network<float> net_;
    nn::Network<float> target_;
    nn::AdamState<float> adam_;
    std::uint64_t updates_ = 0;
    std::vector<float> states_;
    std::vector<float> next_states_;
    std::vector<Action> actions_;
    std::vector<float> rewards_;
    std::vector<char> terminals_;
    std::vector<float> targets_;
    nn::ForwardCache<float> cache_;
    nn::ForwardCache<float> next_cache_;
    nn::ForwardCache<float> act_cache_;
    nn::Gradients<float> grads_;
};

/// Online training loop: act, store, learn, checkpoint.
class Trainer {
public:
    Trainer(const env::GameConfig& game, const DqnConfig& config);

    /// One environment step, plus one train_step once past observe_steps.
    void step();

    std::uint64_t steps() const { return steps_; }
    std::uint64_t episodes() const { return episodes_; }
    const ReplayBuffer& replay() const { return replay_; }
    const Learner& learner() const { return learner_; }
    const nn::Network<float>& network() const { return learner_.network(); }
    /// Indices of the latest minibatch (empty during observation).
    const std::vector<std::size_t>& last_batch() const { return batch_; }

    void set_metrics_sink(MetricsSink sink) { metrics_ = std::move(sink); }
    void set_checkpoint_sink(CheckpointSink sink) { checkpoints_ = std::move(sink); }

private:
    void start_episode();

    env::GameConfig game_;
    DqnConfig config_;
    Learner learner_;
    ReplayBuffer replay_;
    Rng action_rng_;
    Rng sample_rng_;
    std::uint64_t env_seed_base_;
    env::GameState state_;
    FrameStack stack_;
    std::vector<float> tensor_;
    std::uint64_t steps_ = 0;
    std::uint64_t episodes_ = 0;
    std::uint64_t episode_length_ = 0;
    std::vector<std::size_t> batch_;
    MetricsSink metrics_;
    CheckpointSink checkpoints_;
    double start_ms_ = 0.0;
};

/// Seed used for the network initialization of a run.
std::uint64_t init_seed(std::uint64_t seed);

/// Runs config.total_steps environment steps. Sink failures abort the run
/// with an IoError naming the step reached.
nn::Network<float> run_training(const env::GameConfig& game, const DqnConfig& config, const MetricsSink& metrics,
                                const CheckpointSink& checkpoints);

}  // namespace flaprl::dqn
