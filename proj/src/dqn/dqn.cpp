#include <chrono>
#include <cmath>
#include <string>

#include "flaprl/dqn.hpp"
#include "flaprl/error.hpp"

namespace flaprl::dqn {

Action select_action(std::span<const float> q_values, double epsilon, Rng& rng) {
    if (q_values.size() != 2) throw DimensionError("select_action expects two Q values");
    for (float q : q_values)
        if (!std::isfinite(q)) throw NumericError("non-finite Q value in action selection");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw NumericError("epsilon must lie in [0, 1]");
    if (rng.bernoulli(epsilon)) return env::action_from_index(static_cast<int>(rng.below(2)));
    return env::action_from_index(qcore::argmax(q_values));
}

void DqnConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("dqn." + what); };
    if (batch_size < 1) fail("batch_size must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (replay_capacity < static_cast<std::size_t>(batch_size)) fail("replay_capacity must be >= batch_size");
    if (observe_steps < static_cast<std::uint64_t>(batch_size)) fail("observe_steps must be >= batch_size");
    if (loss == Loss::huber && !(huber_delta > 0.0)) fail("huber_delta must be positive");
    if (target_network && target_sync_every == 0) fail("target_sync_every must be positive");
    if (frame_skip < 1) fail("frame_skip must be >= 1");
    if (widths.conv1 < 1 || widths.conv2 < 1 || widths.conv3 < 1 || widths.hidden < 1)
        fail("widths must be positive");
    if (!(preprocess.cutoff >= 0.0f && preprocess.cutoff < 1.0f)) fail("preprocess cutoff must lie in [0, 1)");
    try {
        epsilon.validate();
    } catch (const ConfigError& e) {
        fail(std::string("epsilon: ") + e.what());
    }
}

template <class T>
QLoss<T> q_regression_loss(std::span<const T> q_values, std::span<const Action> actions, std::span<const T> targets,
                           Loss loss, double huber_delta) {
    const std::size_t n = actions.size();
    if (n == 0 || targets.size() != n || q_values.size() != 2 * n)
        throw DimensionError("q_regression_loss: batch sizes disagree");
    QLoss<T> out;
    out.output_gradient.assign(2 * n, T(0));
    const double inv = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = 2 * i + static_cast<std::size_t>(env::to_index(actions[i]));
        const double e = static_cast<double>(q_values[k]) - static_cast<double>(targets[i]);
        double g;
        if (loss == Loss::mse || std::abs(e) <= huber_delta) {
            total += loss == Loss::mse ? e * e : 0.5 * e * e;
            g = loss == Loss::mse ? 2.0 * e : e;
        } else {
            total += huber_delta * (std::abs(e) - 0.5 * huber_delta);
            g = e > 0 ? huber_delta : -huber_delta;
        }
        out.output_gradient[k] = static_cast<T>(g * inv);
    }
    out.loss = total * inv;
    return out;
}

template QLoss<float> q_regression_loss<float>(std::span<const float>, std::span<const Action>,
                                               std::span<const float>, Loss, double);
template QLoss<double> q_regression_loss<double>(std::span<const double>, std::span<const Action>,
                                                 std::span<const double>, Loss, double);

Learner::Learner(const DqnConfig& config, nn::Network<float> net)
    : config_(config), net_(std::move(net)), target_(net_), adam_(net_.parameter_count()) {
    config_.validate();
    if (net_.head_count() != 1 || net_.output_size(0) != 2)
        throw DimensionError("DQN network must have a single two-unit output");
}

double Learner::train_step(std::span<const Transition> batch) {
    const int n = static_cast<int>(batch.size());
    if (n != config_.batch_size)
        throw DimensionError("train_step batch of " + std::to_string(n) + ", expected " +
                             std::to_string(config_.batch_size));
    const std::size_t in = net_.input_size();
    states_.resize(in * batch.size());
    next_states_.resize(in * batch.size());
    actions_.resize(batch.size());
    rewards_.resize(batch.size());
    terminals_.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].state.write_hwc(std::span<float>(states_).subspan(i * in, in));
        batch[i].next_state.write_hwc(std::span<float>(next_states_).subspan(i * in, in));
        actions_[i] = batch[i].action;
        rewards_[i] = batch[i].reward;
        terminals_[i] = batch[i].terminal;
    }
    return update(n);
}

double Learner::train_step(const ReplayBuffer& buffer, std::span<const std::size_t> indices) {
    const int n = static_cast<int>(indices.size());
    if (n != config_.batch_size)
        throw DimensionError("train_step batch of " + std::to_string(n) + ", expected " +
                             std::to_string(config_.batch_size));
    const std::size_t in = net_.input_size();
    states_.resize(in * indices.size());
    next_states_.resize(in * indices.size());
    actions_.resize(indices.size());
    rewards_.resize(indices.size());
    terminals_.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        buffer.write_state(indices[i], std::span<float>(states_).subspan(i * in, in));
        buffer.write_next_state(indices[i], std::span<float>(next_states_).subspan(i * in, in));
        actions_[i] = buffer.action(indices[i]);
        rewards_[i] = buffer.reward(indices[i]);
        terminals_[i] = buffer.terminal(indices[i]);
    }
    return update(n);
}

double Learner::update(int batch) {
    const nn::Network<float>& bootstrap = config_.target_network ? target_ : net_;
    nn::forward_into<float>(bootstrap, next_states_, batch, next_cache_);
    const auto next_q = nn::head_output(bootstrap, next_cache_, 0);
    targets_.resize(static_cast<std::size_t>(batch));
    for (std::size_t i = 0; i < targets_.size(); ++i) {
        const double best = std::max(next_q[2 * i], next_q[2 * i + 1]);
        targets_[i] = static_cast<float>(qcore::bootstrap_target(rewards_[i], terminals_[i] != 0, config_.gamma, best));
    }

    nn::forward_into<float>(net_, states_, batch, cache_);
    const auto q = nn::head_output(net_, cache_, 0);
    const QLoss<float> l = q_regression_loss<float>(q, actions_, targets_, config_.loss, config_.huber_delta);
    if (!std::isfinite(l.loss)) throw NumericError("non-finite DQN loss after " + std::to_string(updates_) + " updates");
    nn::backward_into<float>(net_, cache_, {std::span<const float>(l.output_gradient)}, grads_, nullptr);
    nn::adam_step<float>(net_.parameters(), grads_.values, adam_, static_cast<float>(config_.learning_rate));
    ++updates_;
    if (config_.target_network && updates_ % config_.target_sync_every == 0) target_ = net_;
    return l.loss;
}

std::span<const float> Learner::q_values(std::span<const float> state) {
    nn::forward_into<float>(net_, state, 1, act_cache_);
    return nn::head_output(net_, act_cache_, 0);
}

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, 0); }

namespace {

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

Trainer::Trainer(const env::GameConfig& game, const DqnConfig& config)
    : game_(game),
      config_(config),
      learner_(config, nn::init_network<float>(nn::dqn_architecture(nn::kFrameStackShape, config.widths),
                                               init_seed(config.seed))),
      replay_(config.replay_capacity, config.preprocess.binarize ? ReplayStorage::bits : ReplayStorage::floats),
      action_rng_(derive_seed(config.seed, 1)),
      sample_rng_(derive_seed(config.seed, 2)),
      env_seed_base_(derive_seed(config.seed, 3)),
      tensor_(preprocess::kStackSize),
      start_ms_(now_ms()) {
    game_.validate();
    start_episode();
}

void Trainer::start_episode() {
    auto [state, frame] = env::reset(game_, derive_seed(env_seed_base_, episodes_));
    state_ = std::move(state);
    stack_ = preprocess::stack_reset(preprocess::process(frame, config_.preprocess));
    episode_length_ = 0;
}

void Trainer::step() {
    stack_.write_hwc(std::span<float>(tensor_));
    const double epsilon = config_.epsilon.value(steps_);
    const Action a = select_action(learner_.q_values(tensor_), epsilon, action_rng_);
    const env::StepResult r = env::step_repeated(game_, state_, a, config_.frame_skip);
    FrameStack next = stack_.push(preprocess::process(r.frame, config_.preprocess));
    ++steps_;
    episode_length_ += static_cast<std::uint64_t>(r.ticks);
    replay_.push(Transition{stack_, a, r.reward, next, r.terminal}, steps_);
    stack_ = std::move(next);

    batch_.clear();
    if (steps_ > config_.observe_steps) {
        batch_ = sample_indices(replay_.size(), static_cast<std::size_t>(config_.batch_size), sample_rng_);
        learner_.train_step(replay_, batch_);
    }

    const bool truncated = config_.max_episode_steps != 0 && episode_length_ >= config_.max_episode_steps;
    if (r.terminal || truncated) {
        if (metrics_) {
            metrics_(MetricsRow{Algorithm::dqn, steps_, -1, episodes_, state_.score, episode_length_, epsilon,
                                now_ms() - start_ms_});
        }
        ++episodes_;
        start_episode();
    }
    if (checkpoints_ && config_.checkpoint_every != 0 && steps_ % config_.checkpoint_every == 0)
        checkpoints_(steps_, learner_.network());
}

nn::Network<float> run_training(const env::GameConfig& game, const DqnConfig& config, const MetricsSink& metrics,
                                const CheckpointSink& checkpoints) {
    config.validate();
    Trainer trainer(game, config);
    auto aborted = [&](const std::exception& e) {
        return IoError("dqn run aborted at step " + std::to_string(trainer.steps()) + ": " + e.what());
    };
    if (metrics) {
        trainer.set_metrics_sink([&](const MetricsRow& row) {
            try {
                metrics(row);
            } catch (const IoError& e) {
                throw aborted(e);
            }
        });
    }
    if (checkpoints) {
        trainer.set_checkpoint_sink([&](std::uint64_t step, const nn::Network<float>& net) {
            try {
                checkpoints(step, net);
            } catch (const IoError& e) {
                throw aborted(e);
            }
        });
    }
    while (trainer.steps() < config.total_steps) trainer.step();
    return trainer.network();
}

}  // namespace flaprl::dqn
