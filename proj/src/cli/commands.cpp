#include "flaprl/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>

#include "flaprl/a3c.hpp"
#include "flaprl/dqn.hpp"
#include "flaprl/error.hpp"
#include "flaprl/qcore.hpp"

namespace flaprl::cli {

namespace fs = std::filesystem;

std::string format_row(const MetricsRow& row, bool wall_clock) {
    char aux[64];
    const auto end = std::to_chars(aux, aux + sizeof aux, row.aux).ptr;
    const long long ms = wall_clock ? std::llround(row.wall_ms) : 0;
    return std::string(algorithm_name(row.algo)) + ',' + std::to_string(row.step) + ',' + std::to_string(row.worker) +
           ',' + std::to_string(row.episode) + ',' + std::to_string(row.score) + ',' + std::to_string(row.length) +
           ',' + std::string(aux, end) + ',' + std::to_string(ms);
}

CsvMetricsWriter::CsvMetricsWriter(const std::string& path, bool wall_clock)
    : path_(path), out_(path, std::ios::trunc), wall_clock_(wall_clock) {
    out_ << kCsvHeader << '\n';
    out_.flush();
    if (!out_) throw IoError("cannot write metrics file " + path);
}

void CsvMetricsWriter::write(const MetricsRow& row) {
    out_ << format_row(row, wall_clock_) << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing metrics file " + path_);
}

EvalReport evaluate(const env::GameConfig& game, const preprocess::PreprocessConfig& pre, Controller controller,
                    const Checkpoint* checkpoint, int episodes, std::uint64_t seed, std::uint64_t max_steps,
                    int frame_skip, EvalMode mode) {
    if (episodes < 1) throw ConfigError("eval needs at least one episode");
    if (controller == Controller::network && checkpoint == nullptr) throw ConfigError("eval needs a checkpoint");
    if (frame_skip < 1) throw ConfigError("eval frame skip must be >= 1");
    if (!(mode.epsilon >= 0.0 && mode.epsilon <= 1.0)) throw ConfigError("eval epsilon must lie in [0, 1]");
    game.validate();

    Rng coin(derive_seed(seed, 8));
    Rng explore(derive_seed(seed, 9));
    nn::ForwardCache<float> cache;
    std::vector<float> x(preprocess::kStackSize);
    auto choose = [&](const env::GameState& s, const preprocess::FrameStack& stack) {
        switch (controller) {
            case Controller::oracle:
                return env::oracle_action(game, s);
            case Controller::random:
                return coin.bernoulli(0.5) ? env::Action::Flap : env::Action::NoFlap;
            case Controller::network:
                break;
        }
        const nn::Network<float>& net = checkpoint->network;
        stack.write_hwc(std::span<float>(x));
        nn::forward_into<float>(net, x, 1, cache);
        const auto out = nn::head_output(net, cache, 0);
        if (checkpoint->algo == Algorithm::dqn) {
            if (mode.epsilon > 0.0 && explore.bernoulli(mode.epsilon))
                return explore.bernoulli(0.5) ? env::Action::Flap : env::Action::NoFlap;
            return env::action_from_index(qcore::argmax(out));
        }
        if (mode.sample) return explore.uniform() < out[0] ? env::Action::Flap : env::Action::NoFlap;
        return out[0] > 0.5f ? env::Action::Flap : env::Action::NoFlap;
    };

    EvalReport report;
    const std::uint64_t env_base = derive_seed(seed, 7);
    for (int e = 0; e < episodes; ++e) {
        auto [state, frame] = env::reset(game, derive_seed(env_base, static_cast<std::uint64_t>(e)));
        preprocess::FrameStack stack;
        const bool pixels = controller == Controller::network;
        if (pixels) stack = preprocess::stack_reset(preprocess::process(frame, pre));
        std::uint64_t length = 0;
        while (!state.terminal && length < max_steps) {
            const env::Action a = choose(state, stack);
            if (pixels) {
                const auto ticks = static_cast<int>(std::min<std::uint64_t>(frame_skip, max_steps - length));
                const env::StepResult r = env::step_repeated(game, state, a, ticks);
                stack = stack.push(preprocess::process(r.frame, pre));
                length += static_cast<std::uint64_t>(r.ticks);
            } else {
                env::advance(game, state, a);
                ++length;
            }
        }
        report.episodes.push_back({state.score, length});
    }
    double score = 0.0, length = 0.0;
    report.min_score = report.episodes.front().score;
    report.max_score = report.episodes.front().score;
    for (const auto& ep : report.episodes) {
        score += ep.score;
        length += static_cast<double>(ep.length);
        report.min_score = std::min(report.min_score, ep.score);
        report.max_score = std::max(report.max_score, ep.score);
    }
    report.mean_score = score / episodes;
    report.mean_length = length / episodes;
    return report;
}

namespace {

template <class Body>
int guarded(std::ostream& err, Body body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return bad_config;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << '\n';
        return corrupt_checkpoint;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return io_failure;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return numeric_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
}

RunConfig config_or_default(const std::optional<std::string>& path) {
    if (path) return load_config(*path);
    RunConfig c;
    c.finalize();
    return c;
}

void apply_thread_override(RunConfig& c) {
    const char* v = std::getenv("FLAPRL_THREADS");
    if (v == nullptr || *v == '\0') return;
    const std::string_view s(v);
    int n = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc{} || end != s.data() + s.size() || n < 1)
        throw ConfigError("FLAPRL_THREADS must be a positive integer, got '" + std::string(s) + "'");
    c.a3c.workers = n;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write " + path.string());
}

const char* action_name(env::Action a) { return a == env::Action::Flap ? "flap" : "noflap"; }

}  // namespace

int cmd_train(Algorithm algo, const std::optional<std::string>& config_path, const std::optional<std::string>& out_dir,
              std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunConfig cfg = config_or_default(config_path);
        if (seed) cfg.set_seed(*seed);
        if (out_dir) cfg.out = *out_dir;
        apply_thread_override(cfg);
        cfg.finalize();

        const fs::path dir(cfg.out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
        write_text(dir / "config.txt", serialize_config(cfg));

        CsvMetricsWriter csv((dir / "metrics.csv").string(), cfg.wall_clock);
        const MetricsSink metrics = [&](const MetricsRow& row) { csv.write(row); };
        const CheckpointSink checkpoints = [&](std::uint64_t step, const nn::Network<float>& net) {
            const std::string name =
                cfg.keep_checkpoints ? "checkpoint_" + std::to_string(step) + ".bin" : std::string("checkpoint.bin");
            save_checkpoint((dir / name).string(), algo, step, net);
        };

        if (algo == Algorithm::dqn) {
            const auto net = dqn::run_training(cfg.env, cfg.dqn, metrics, checkpoints);
            save_checkpoint((dir / "final.bin").string(), algo, cfg.dqn.total_steps, net);
            out << "dqn finished " << cfg.dqn.total_steps << " steps; outputs in " << dir.string() << '\n';
        } else {
            const auto r = a3c::run_a3c(cfg.env, cfg.a3c, metrics, checkpoints);
            save_checkpoint((dir / "final.bin").string(), algo, r.updates, r.network);
            out << "a3c finished " << r.episodes << " episodes in " << r.rounds << " rounds (" << r.updates
                << " updates, " << r.env_steps << " env steps); outputs in " << dir.string() << '\n';
        }
        return static_cast<int>(ok);
    });
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = config_or_default(o.config);
        std::optional<Checkpoint> cp;
        if (o.controller == Controller::network) {
            if (!o.checkpoint) throw ConfigError("eval needs --checkpoint unless a baseline flag is given");
            cp = load_checkpoint(*o.checkpoint);
        }
        const int skip = !cp ? 1 : cp->algo == Algorithm::dqn ? cfg.dqn.frame_skip : cfg.a3c.frame_skip;
        const EvalReport r = evaluate(cfg.env, cfg.preprocess, o.controller, cp ? &*cp : nullptr, o.episodes, o.seed,
                                      cfg.eval_max_steps, skip, o.mode);

        const char* who = o.controller == Controller::oracle   ? "oracle"
                          : o.controller == Controller::random ? "random"
                                                               : algorithm_name(cp->algo);
        out << "controller " << who;
        if (cp) out << " checkpoint_step " << cp->step;
        if (cp && cp->algo == Algorithm::dqn && o.mode.epsilon > 0.0) out << " epsilon " << o.mode.epsilon;
        if (cp && cp->algo == Algorithm::a3c && o.mode.sample) out << " sampled";
        out << "\nepisodes " << r.episodes.size() << " mean_score " << r.mean_score << " min_score " << r.min_score
            << " max_score " << r.max_score << " mean_length " << r.mean_length << '\n';

        const std::string csv = o.csv ? *o.csv : (o.checkpoint && cp ? *o.checkpoint + ".eval.csv" : "eval.csv");
        std::string text = "episode,score,length\n";
        for (std::size_t i = 0; i < r.episodes.size(); ++i)
            text += std::to_string(i) + ',' + std::to_string(r.episodes[i].score) + ',' +
                    std::to_string(r.episodes[i].length) + '\n';
        write_text(csv, text);
        return static_cast<int>(ok);
    });
}

std::string render_raw(const env::Frame& frame) {
    std::string s;
    for (int y = 0; y < frame.height; y += 8) {
        for (int x = 0; x < frame.width; x += 4) {
            const float v = frame.at(x, y);
            s += v == env::kBird ? '#' : v == env::kPipe ? '+' : ' ';
        }
        s += '\n';
    }
    return s;
}

std::string render_processed(const env::Frame& frame) {
    std::string s;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) s += frame.at(x, y) >= 0.5f ? '#' : '.';
        s += '\n';
    }
    return s;
}

int cmd_dump_frames(const std::optional<std::string>& config_path, int steps, DumpPolicy policy, std::uint64_t seed,
                    std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (steps < 0) throw ConfigError("--steps must be >= 0");
        const RunConfig cfg = config_or_default(config_path);
        Rng coin(derive_seed(seed, 8));
        std::uint64_t episode = 0;
        auto [state, frame] = env::reset(cfg.env, derive_seed(derive_seed(seed, 7), episode));
        for (int i = 0; i < steps; ++i) {
            if (state.terminal) {
                ++episode;
                state = env::reset(cfg.env, derive_seed(derive_seed(seed, 7), episode)).first;
            }
            env::Action a = env::Action::NoFlap;
            if (policy == DumpPolicy::random) a = coin.bernoulli(0.5) ? env::Action::Flap : env::Action::NoFlap;
            if (policy == DumpPolicy::oracle) a = env::oracle_action(cfg.env, state);
            const env::StepResult r = env::step(cfg.env, state, a);
            const env::Frame small = preprocess::process(r.frame, cfg.preprocess);
            out << "step " << i << " episode " << episode << " action " << action_name(a) << " reward " << r.reward
                << " score " << r.score << (r.terminal ? " terminal" : "") << '\n';
            out << "raw " << (r.frame.width + 3) / 4 << 'x' << (r.frame.height + 7) / 8 << '\n' << render_raw(r.frame);
            out << "preprocessed " << small.width << 'x' << small.height << '\n' << render_processed(small);
        }
        return static_cast<int>(ok);
    });
}

}  // namespace flaprl::cli
