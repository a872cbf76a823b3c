#include "flaprl/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "flaprl/error.hpp"

namespace flaprl::cli {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                      std::string(expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size()) {
        if constexpr (std::is_floating_point_v<T>) {
            bad_value(key, v, "a number");
        } else {
            bad_value(key, v, "an integer");
        }
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_value(key, v, "true or false");
}

template <class T>
std::string format_number(T value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <class T, class Access>
Field number(const char* key, Access access) {
    return {key, [access](const RunConfig& c) { return format_number(access(const_cast<RunConfig&>(c))); },
            [access](RunConfig& c, std::string_view k, std::string_view v) { access(c) = parse_number<T>(k, v); }};
}

template <class Access>
Field boolean(const char* key, Access access) {
    return {key, [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [access](RunConfig& c, std::string_view k, std::string_view v) { access(c) = parse_bool(k, v); }};
}

#define FLAPRL_NUM(T, key, member) number<T>(key, [](RunConfig& c) -> T& { return c.member; })
#define FLAPRL_BOOL(key, member) boolean(key, [](RunConfig& c) -> bool& { return c.member; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"env.preset", [](const RunConfig& c) { return std::string(c.preset == EnvPreset::easy ? "easy" : "standard"); },
         [](RunConfig& c, std::string_view k, std::string_view v) {
             if (v == "standard") {
                 c.preset = EnvPreset::standard;
                 c.env = env::GameConfig::standard();
             } else if (v == "easy") {
                 c.preset = EnvPreset::easy;
                 c.env = env::GameConfig::easy();
             } else {
                 bad_value(k, v, "standard or easy");
             }
         }},
        FLAPRL_NUM(int, "env.screen_width", env.screen_width),
        FLAPRL_NUM(int, "env.screen_height", env.screen_height),
        FLAPRL_NUM(int, "env.bird_x", env.bird_x),
        FLAPRL_NUM(int, "env.bird_size", env.bird_size),
        FLAPRL_NUM(double, "env.gravity", env.gravity),
        FLAPRL_NUM(double, "env.flap_impulse", env.flap_impulse),
        FLAPRL_NUM(double, "env.max_fall_speed", env.max_fall_speed),
        FLAPRL_NUM(double, "env.pipe_speed", env.pipe_speed),
        FLAPRL_NUM(int, "env.pipe_gap", env.pipe_gap),
        FLAPRL_NUM(int, "env.pipe_spacing", env.pipe_spacing),
        FLAPRL_NUM(int, "env.pipe_width", env.pipe_width),
        FLAPRL_NUM(int, "env.gap_center_min", env.gap_center_min),
        FLAPRL_NUM(int, "env.gap_center_max", env.gap_center_max),

        FLAPRL_NUM(float, "preprocess.cutoff", preprocess.cutoff),
        FLAPRL_BOOL("preprocess.binarize", preprocess.binarize),

        FLAPRL_NUM(int, "dqn.batch_size", dqn.batch_size),
        FLAPRL_NUM(double, "dqn.gamma", dqn.gamma),
        FLAPRL_NUM(double, "dqn.learning_rate", dqn.learning_rate),
        FLAPRL_NUM(std::size_t, "dqn.replay_capacity", dqn.replay_capacity),
        FLAPRL_NUM(std::uint64_t, "dqn.checkpoint_every", dqn.checkpoint_every),
        FLAPRL_NUM(std::uint64_t, "dqn.observe_steps", dqn.observe_steps),
        FLAPRL_NUM(std::uint64_t, "dqn.total_steps", dqn.total_steps),
        FLAPRL_NUM(std::uint64_t, "dqn.seed", dqn.seed),
        FLAPRL_NUM(double, "dqn.epsilon_initial", dqn.epsilon.initial),
        FLAPRL_NUM(double, "dqn.epsilon_final", dqn.epsilon.final),
        FLAPRL_NUM(std::uint64_t, "dqn.epsilon_anneal_steps", dqn.epsilon.anneal_steps),
        {"dqn.loss", [](const RunConfig& c) { return std::string(c.dqn.loss == dqn::Loss::huber ? "huber" : "mse"); },
         [](RunConfig& c, std::string_view k, std::string_view v) {
             if (v == "mse") {
                 c.dqn.loss = dqn::Loss::mse;
             } else if (v == "huber") {
                 c.dqn.loss = dqn::Loss::huber;
             } else {
                 bad_value(k, v, "mse or huber");
             }
         }},
        FLAPRL_NUM(double, "dqn.huber_delta", dqn.huber_delta),
        FLAPRL_BOOL("dqn.target_network", dqn.target_network),
        FLAPRL_NUM(std::uint64_t, "dqn.target_sync_every", dqn.target_sync_every),
        FLAPRL_NUM(std::uint64_t, "dqn.max_episode_steps", dqn.max_episode_steps),
        FLAPRL_NUM(int, "dqn.frame_skip", dqn.frame_skip),
        FLAPRL_NUM(int, "dqn.conv1", dqn.widths.conv1),
        FLAPRL_NUM(int, "dqn.conv2", dqn.widths.conv2),
        FLAPRL_NUM(int, "dqn.conv3", dqn.widths.conv3),
        FLAPRL_NUM(int, "dqn.hidden", dqn.widths.hidden),

        FLAPRL_NUM(int, "a3c.workers", a3c.workers),
        FLAPRL_NUM(int, "a3c.episodes_per_round", a3c.episodes_per_round),
        FLAPRL_NUM(int, "a3c.t_max", a3c.t_max),
        FLAPRL_NUM(double, "a3c.gamma", a3c.gamma),
        FLAPRL_NUM(double, "a3c.learning_rate", a3c.learning_rate),
        FLAPRL_NUM(double, "a3c.value_loss_coeff", a3c.value_loss_coeff),
        FLAPRL_NUM(double, "a3c.entropy_coeff", a3c.entropy_coeff),
        FLAPRL_NUM(std::uint64_t, "a3c.total_episodes", a3c.total_episodes),
        FLAPRL_NUM(std::uint64_t, "a3c.seed", a3c.seed),
        {"a3c.sharing",
         [](const RunConfig& c) {
             return std::string(c.a3c.sharing == a3c::SharingMode::relaxed ? "relaxed" : "serialized");
         },
         [](RunConfig& c, std::string_view k, std::string_view v) {
             if (v == "serialized") {
                 c.a3c.sharing = a3c::SharingMode::serialized;
             } else if (v == "relaxed") {
                 c.a3c.sharing = a3c::SharingMode::relaxed;
             } else {
                 bad_value(k, v, "serialized or relaxed");
             }
         }},
        FLAPRL_NUM(std::uint64_t, "a3c.checkpoint_every_rounds", a3c.checkpoint_every_rounds),
        FLAPRL_NUM(std::uint64_t, "a3c.max_episode_steps", a3c.max_episode_steps),
        FLAPRL_NUM(int, "a3c.frame_skip", a3c.frame_skip),
        FLAPRL_NUM(double, "a3c.max_grad_norm", a3c.max_grad_norm),
        FLAPRL_NUM(int, "a3c.conv1", a3c.widths.conv1),
        FLAPRL_NUM(int, "a3c.conv2", a3c.widths.conv2),
        FLAPRL_NUM(int, "a3c.hidden", a3c.widths.hidden),

        {"run.out", [](const RunConfig& c) { return c.out; },
         [](RunConfig& c, std::string_view k, std::string_view v) {
             if (v.empty()) bad_value(k, v, "a non-empty path");
             c.out = std::string(v);
         }},
        FLAPRL_BOOL("run.wall_clock", wall_clock),
        FLAPRL_BOOL("run.keep_checkpoints", keep_checkpoints),
        FLAPRL_NUM(std::uint64_t, "eval.max_steps", eval_max_steps),
    };
    return table;
}

#undef FLAPRL_NUM
#undef FLAPRL_BOOL

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
    dqn.seed = seed;
    a3c.seed = seed;
}

void RunConfig::finalize() {
    dqn.preprocess = preprocess;
    a3c.preprocess = preprocess;
    try {
        env.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("env: ") + e.what());
    }
    dqn.validate();
    a3c.validate();
    if (eval_max_steps == 0) throw ConfigError("eval.max_steps must be positive");
}

RunConfig parse_config(std::string_view text) {
    std::map<std::string, const Field*, std::less<>> by_key;
    for (const Field& f : fields()) by_key.emplace(f.key, &f);

    std::vector<std::pair<const Field*, std::string>> assignments;
    std::map<std::string, int, std::less<>> seen;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = by_key.find(key);
        if (it == by_key.end())
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        if (const auto [pos, fresh] = seen.emplace(std::string(key), line_no); !fresh)
            throw ConfigError("config key '" + std::string(key) + "' repeated on lines " +
                              std::to_string(pos->second) + " and " + std::to_string(line_no));
        assignments.emplace_back(it->second, std::string(value));
    }

    RunConfig c;
    for (const auto& [f, v] : assignments)
        if (std::string_view(f->key) == "env.preset") f->set(c, f->key, v);
    for (const auto& [f, v] : assignments)
        if (std::string_view(f->key) != "env.preset") f->set(c, f->key, v);
    c.finalize();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string serialize_config(const RunConfig& config) {
    std::string out;
    for (const Field& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Field& f : fields()) keys.emplace_back(f.key);
    return keys;
}

}  // namespace flaprl::cli
