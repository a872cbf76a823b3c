#include "flaprl/a3c.hpp"

#include <cmath>
#include <exception>
#include <memory>
#include <string>
#include <thread>

#include "flaprl/error.hpp"

namespace flaprl::a3c {

void A3cConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("a3c." + what); };
    if (workers < 1) fail("workers must be >= 1");
    if (episodes_per_round < 1) fail("episodes_per_round must be >= 1");
    if (t_max < 1) fail("t_max must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (!(value_loss_coeff >= 0.0)) fail("value_loss_coeff must be >= 0");
    if (!(entropy_coeff >= 0.0)) fail("entropy_coeff must be >= 0");
    if (frame_skip < 1) fail("frame_skip must be >= 1");
    if (!(max_grad_norm >= 0.0) || !std::isfinite(max_grad_norm)) fail("max_grad_norm must be >= 0");
    if (widths.conv1 < 1 || widths.conv2 < 1 || widths.hidden < 1) fail("widths must be positive");
    if (!(preprocess.cutoff >= 0.0f && preprocess.cutoff < 1.0f)) fail("preprocess cutoff must lie in [0, 1)");
}

void clip_global_norm(std::span<float> grads, double max_norm) {
    double sq = 0.0;
    for (float g : grads) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const auto scale = static_cast<float>(max_norm / norm);
    for (float& g : grads) g *= scale;
}

Action sample_action(double flap_probability, Rng& rng) {
    if (!(flap_probability > 0.0 && flap_probability < 1.0))
        throw NumericError("flap probability " + std::to_string(flap_probability) + " outside (0, 1)");
    return rng.uniform() < flap_probability ? Action::Flap : Action::NoFlap;
}

std::vector<double> compute_returns(std::span<const double> rewards, double bootstrap_value, double gamma) {
    std::vector<double> out(rewards.size());
    double running = bootstrap_value;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    return out;
}

std::vector<double> compute_returns(const Rollout& rollout, double gamma) {
    return compute_returns(rollout.rewards, rollout.bootstrap_value, gamma);
}

A3cLoss a3c_loss(std::span<const Action> actions, std::span<const double> returns,
                 std::span<const double> policy_outputs, std::span<const double> value_outputs,
                 double value_loss_coeff, double entropy_coeff) {
    const std::size_t n = actions.size();
    if (returns.size() != n || policy_outputs.size() != n || value_outputs.size() != n)
        throw DimensionError("a3c_loss: segment lengths disagree");
    constexpr double floor = 1e-12;
    A3cLoss out;
    out.policy_grad.resize(n);
    out.value_grad.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double p = policy_outputs[t];
        if (!(p > 0.0 && p < 1.0)) throw NumericError("policy output " + std::to_string(p) + " outside (0, 1)");
        const double v = value_outputs[t];
        if (!std::isfinite(v) || !std::isfinite(returns[t])) throw NumericError("non-finite value or return");
        const double q = 1.0 - p;
        const double a = env::to_index(actions[t]);
        const double advantage = returns[t] - v;
        const double log_p = std::log(std::max(p, floor));
        const double log_q = std::log(std::max(q, floor));
        const double dlog_p = p > floor ? 1.0 / p : 0.0;
        const double dlog_q = q > floor ? -1.0 / q : 0.0;

        out.policy += -(a * log_p + (1 - a) * log_q) * advantage;
        out.value += advantage * advantage;
        out.entropy += -(p * log_p + q * log_q);

        const double dpolicy = -(a * dlog_p + (1 - a) * dlog_q) * advantage;
        const double dentropy = -(log_p + p * dlog_p + q * dlog_q - log_q);
        out.policy_grad[t] = dpolicy - entropy_coeff * dentropy;
        out.value_grad[t] = -2.0 * value_loss_coeff * advantage;
    }
    out.total = out.policy + value_loss_coeff * out.value - entropy_coeff * out.entropy;
    return out;
}

SharedParams::SharedParams(nn::Network<float> net, SharingMode mode)
    : net_(std::move(net)), adam_(net_.parameter_count()), mode_(mode) {}

void SharedParams::snapshot(nn::Network<float>& local) const {
    if (local.parameter_count() != net_.parameter_count())
        throw DimensionError("local network does not match the shared parameters");
    auto dst = local.parameters();
    if (mode_ == SharingMode::serialized) {
        std::lock_guard lock(mutex_);
        std::copy(net_.parameters().begin(), net_.parameters().end(), dst.begin());
        return;
    }
    auto& params = const_cast<nn::Network<float>&>(net_);
    auto src = params.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::atomic_ref<float>(src[i]).load(std::memory_order_relaxed);
}

std::uint64_t SharedParams::apply(std::span<const float> grads, float learning_rate) {
    if (mode_ == SharingMode::serialized) {
        std::lock_guard lock(mutex_);
        nn::adam_step<float>(net_.parameters(), grads, adam_, learning_rate);
        return ++step_;
    }
    auto params = net_.parameters();
    if (grads.size() != params.size()) throw DimensionError("gradient size does not match the shared parameters");
    for (float g : grads)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient");
    const std::uint64_t t = ++adam_step_;
    const auto [bias1, bias2] = nn::adam_bias_corrections(adam_.beta1, adam_.beta2, t);
    const float b1 = adam_.beta1, b2 = adam_.beta2, eps = adam_.epsilon;
    const float c1 = static_cast<float>(bias1), c2 = static_cast<float>(bias2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::atomic_ref<float> m(adam_.first_moment[i]);
        std::atomic_ref<float> v(adam_.second_moment[i]);
        std::atomic_ref<float> p(params[i]);
        const float mi = b1 * m.load(std::memory_order_relaxed) + (1 - b1) * grads[i];
        const float vi = b2 * v.load(std::memory_order_relaxed) + (1 - b2) * grads[i] * grads[i];
        m.store(mi, std::memory_order_relaxed);
        v.store(vi, std::memory_order_relaxed);
        p.store(p.load(std::memory_order_relaxed) - learning_rate * (mi * c1) / (std::sqrt(vi * c2) + eps),
                std::memory_order_relaxed);
    }
    return ++step_;
}

nn::Network<float> SharedParams::copy() const {
    nn::Network<float> out(net_.architecture());
    snapshot(out);
    return out;
}

std::uint64_t worker_seed(std::uint64_t seed, int id) { return mix64(seed + static_cast<std::uint64_t>(id)); }

Worker::Worker(int worker_id, const nn::Architecture& arch, std::uint64_t run_seed)
    : id(worker_id),
      rng(derive_seed(worker_seed(run_seed, worker_id), 1)),
      env_seed_base(derive_seed(worker_seed(run_seed, worker_id), 3)),
      local(arch) {}

RoundStats worker_round(Worker& w, SharedParams& shared, const env::GameConfig& game, const A3cConfig& cfg,
                        const MetricsSink& metrics, const std::atomic<bool>* stop) {
    RoundStats stats;
    const std::size_t in = w.local.input_size();
    std::vector<float> x(in);
    Rollout ro;

    env::GameState state;
    preprocess::FrameStack stack;
    std::uint64_t length = 0;
    double loss_sum = 0.0;
    std::uint64_t updates = 0;
    auto start_episode = [&] {
        auto [s, f] = env::reset(game, derive_seed(w.env_seed_base, w.episodes));
        state = std::move(s);
        stack = preprocess::stack_reset(preprocess::process(f, cfg.preprocess));
        length = 0;
        loss_sum = 0.0;
        updates = 0;
    };
    auto act = [&] {
        stack.write_hwc(std::span<float>(x));
        nn::forward_into<float>(w.local, x, 1, w.act_cache);
        return std::pair<double, double>(nn::head_output(w.local, w.act_cache, 0)[0],
                                         nn::head_output(w.local, w.act_cache, 1)[0]);
    };

    start_episode();
    while (stats.episodes < cfg.episodes_per_round) {
        if (stop != nullptr && stop->load(std::memory_order_relaxed)) break;
        shared.snapshot(w.local);

        ro.states.clear();
        ro.actions.clear();
        ro.rewards.clear();
        ro.values.clear();
        bool terminal = false;
        bool ended = false;
        for (int k = 0; k < cfg.t_max; ++k) {
            const auto [p, v] = act();
            const Action a = sample_action(p, w.rng);
            const env::StepResult r = env::step_repeated(game, state, a, cfg.frame_skip);
            ro.states.insert(ro.states.end(), x.begin(), x.end());
            ro.actions.push_back(a);
            ro.rewards.push_back(r.reward);
            ro.values.push_back(v);
            stack = stack.push(preprocess::process(r.frame, cfg.preprocess));
            length += static_cast<std::uint64_t>(r.ticks);
            w.env_steps += static_cast<std::uint64_t>(r.ticks);
            stats.env_steps += static_cast<std::uint64_t>(r.ticks);
            if (r.terminal) {
                terminal = ended = true;
                break;
            }
            if (cfg.max_episode_steps != 0 && length >= cfg.max_episode_steps) {
                ended = true;
                break;
            }
        }
        ro.bootstrap_value = terminal ? 0.0 : act().second;

        const int n = static_cast<int>(ro.size());
        const auto returns = compute_returns(ro, cfg.gamma);
        nn::forward_into<float>(w.local, ro.states, n, w.batch_cache);
        const auto pol = nn::head_output(w.local, w.batch_cache, 0);
        const auto val = nn::head_output(w.local, w.batch_cache, 1);
        const std::vector<double> pd(pol.begin(), pol.end());
        const std::vector<double> vd(val.begin(), val.end());
        const A3cLoss loss = a3c_loss(ro.actions, returns, pd, vd, cfg.value_loss_coeff, cfg.entropy_coeff);
        if (!std::isfinite(loss.total)) throw NumericError("non-finite A3C loss");
        const std::vector<float> pg(loss.policy_grad.begin(), loss.policy_grad.end());
        const std::vector<float> vg(loss.value_grad.begin(), loss.value_grad.end());
        nn::backward_into<float>(w.local, w.batch_cache, {std::span<const float>(pg), std::span<const float>(vg)},
                                 w.grads, nullptr);
        if (cfg.max_grad_norm > 0.0) clip_global_norm(w.grads.values, cfg.max_grad_norm);
        const std::uint64_t step = shared.apply(w.grads.values, static_cast<float>(cfg.learning_rate));
        ++stats.updates;
        ++updates;
        loss_sum += loss.total;

        if (ended) {
            if (metrics) {
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - w.started).count();
                metrics(MetricsRow{Algorithm::a3c, step, w.id, w.episodes, state.score, length,
                                   loss_sum / static_cast<double>(updates), ms});
            }
            ++w.episodes;
            ++stats.episodes;
            if (stats.episodes < cfg.episodes_per_round) start_episode();
        }
    }
    return stats;
}

namespace {

[[noreturn]] void rethrow_with_context(std::exception_ptr error, const std::string& prefix) {
    try {
        std::rethrow_exception(error);
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const std::exception& e) {
        throw Error(prefix + e.what());
    }
}

struct Failure {
    std::mutex mutex;
    std::exception_ptr error;
    std::string where;

    void record(std::exception_ptr e, const std::string& w) {
        std::lock_guard lock(mutex);
        if (!error) {
            error = std::move(e);
            where = w;
        }
    }
};

template <class Body>
void run_workers(int count, Body body) {
    if (count == 1) {
        body(0);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) threads.emplace_back(body, w);
    for (auto& t : threads) t.join();
}

}  // namespace

A3cResult run_a3c(const env::GameConfig& game, const A3cConfig& cfg, const MetricsSink& metrics,
                  const CheckpointSink& checkpoints) {
    cfg.validate();
    game.validate();
    const nn::Architecture arch = nn::a3c_architecture(nn::kFrameStackShape, cfg.widths);
    SharedParams shared(nn::init_network<float>(arch, derive_seed(cfg.seed, 0)), cfg.sharing);
    std::vector<std::unique_ptr<Worker>> workers;
    for (int w = 0; w < cfg.workers; ++w) workers.push_back(std::make_unique<Worker>(w, arch, cfg.seed));

    std::mutex sink_mutex;
    MetricsSink serialized;
    if (metrics) {
        serialized = [&](const MetricsRow& row) {
            std::lock_guard lock(sink_mutex);
            metrics(row);
        };
    }

    const auto per_round = static_cast<std::uint64_t>(cfg.episodes_per_round_total());
    const std::uint64_t rounds = (cfg.total_episodes + per_round - 1) / per_round;
    A3cResult result{shared.copy()};
    std::atomic<bool> stop{false};
    for (std::uint64_t round = 0; round < rounds; ++round) {
        Failure failure;
        std::vector<RoundStats> stats(workers.size());
        run_workers(cfg.workers, [&](int w) {
            try {
                stats[static_cast<std::size_t>(w)] = worker_round(*workers[static_cast<std::size_t>(w)], shared, game,
                                                                  cfg, serialized, &stop);
            } catch (...) {
                failure.record(std::current_exception(), "a3c worker " + std::to_string(w) + " at global step " +
                                                             std::to_string(shared.global_step()) + ": ");
                stop.store(true);
            }
        });
        if (failure.error) rethrow_with_context(failure.error, failure.where);
        ++result.rounds;
        for (const RoundStats& s : stats) {
            result.episodes += static_cast<std::uint64_t>(s.episodes);
            result.env_steps += s.env_steps;
        }
        if (checkpoints && cfg.checkpoint_every_rounds != 0 && (round + 1) % cfg.checkpoint_every_rounds == 0) {
            try {
                checkpoints(shared.global_step(), shared.copy());
            } catch (const IoError& e) {
                throw IoError("a3c run aborted after round " + std::to_string(round + 1) + ": " + e.what());
            }
        }
    }
    result.network = shared.copy();
    result.updates = shared.global_step();
    return result;
}

double measure_throughput(const env::GameConfig& game, const A3cConfig& cfg, std::chrono::duration<double> window) {
    cfg.validate();
    const nn::Architecture arch = nn::a3c_architecture(nn::kFrameStackShape, cfg.widths);
    SharedParams shared(nn::init_network<float>(arch, derive_seed(cfg.seed, 0)), cfg.sharing);
    std::vector<std::unique_ptr<Worker>> workers;
    for (int w = 0; w < cfg.workers; ++w) workers.push_back(std::make_unique<Worker>(w, arch, cfg.seed));

    std::atomic<bool> stop{false};
    std::atomic<std::uint64_t> steps{0};
    Failure failure;
    const auto begin = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    for (int w = 0; w < cfg.workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                while (!stop.load(std::memory_order_relaxed)) {
                    const RoundStats s = worker_round(*workers[static_cast<std::size_t>(w)], shared, game, cfg, {}, &stop);
                    steps.fetch_add(s.env_steps);
                }
            } catch (...) {
                failure.record(std::current_exception(), "a3c worker " + std::to_string(w) + ": ");
                stop.store(true);
            }
        });
    }
    std::this_thread::sleep_for(window);
    stop.store(true);
    for (auto& t : threads) t.join();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    if (failure.error) rethrow_with_context(failure.error, failure.where);
    return static_cast<double>(steps.load()) / seconds;
}

}  // namespace flaprl::a3c
