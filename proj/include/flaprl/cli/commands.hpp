#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flaprl/cli/checkpoint.hpp"
#include "flaprl/cli/config.hpp"
#include "flaprl/metrics.hpp"

namespace flaprl::cli {

inline constexpr const char* kCsvHeader = "algo,step,worker,episode,score,length,aux,wall_ms";

/// Exit statuses.
enum Exit : int { ok = 0, failure = 1, bad_config = 2, io_failure = 3, numeric_failure = 4, corrupt_checkpoint = 5 };

std::string format_row(const MetricsRow& row, bool wall_clock);

/// Appends rows to a CSV file, flushing after each so a killed run leaves a
/// readable prefix. Thread-compatible; callers serialize.
class CsvMetricsWriter {
public:
    CsvMetricsWriter(const std::string& path, bool wall_clock);

    void write(const MetricsRow& row);

private:
    std::string path_;
    std::ofstream out_;
    bool wall_clock_;
};

enum class Controller : std::uint8_t { network, oracle, random };

struct EvalEpisode {
    int score = 0;
    std::uint64_t length = 0;

    friend bool operator==(const EvalEpisode&, const EvalEpisode&) = default;
};

struct EvalReport {
    std::vector<EvalEpisode> episodes;
    double mean_score = 0.0;
    int min_score = 0;
    int max_score = 0;
    double mean_length = 0.0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Exploration during evaluation; the default is greedy.
struct EvalMode {
    double epsilon = 0.0;  // DQN: uniform random action with this probability
    bool sample = false;   // A3C: flap with probability p instead of p > 0.5

    friend bool operator==(const EvalMode&, const EvalMode&) = default;
};

/// Greedy evaluation unless `mode` says otherwise. DQN acts on argmax Q; A3C flaps iff p > 0.5. The
/// oracle and random controllers ignore `checkpoint` and `frame_skip` and
/// act every tick. Episode k uses the same environment seed for every
/// controller. Lengths are in game ticks.
EvalReport evaluate(const env::GameConfig& game, const preprocess::PreprocessConfig& pre, Controller controller,
                    const Checkpoint* checkpoint, int episodes, std::uint64_t seed, std::uint64_t max_steps,
                    int frame_skip = 1, EvalMode mode = {});

/// Each command maps errors to exit statuses and reports them on `err`.
int cmd_train(Algorithm algo, const std::optional<std::string>& config_path, const std::optional<std::string>& out_dir,
              std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err);

struct EvalOptions {
    std::optional<std::string> checkpoint;
    int episodes = 20;
    std::uint64_t seed = 0;
    Controller controller = Controller::network;
    std::optional<std::string> config;
    std::optional<std::string> csv;
    EvalMode mode;
};

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

enum class DumpPolicy : std::uint8_t { noflap, random, oracle };

int cmd_dump_frames(const std::optional<std::string>& config_path, int steps, DumpPolicy policy, std::uint64_t seed,
                    std::ostream& out, std::ostream& err);

/// Character art: raw frames sampled every 4th column and 8th row with
/// ' ' background, '+' pipe, '#' bird; preprocessed planes with '.' and '#'.
std::string render_raw(const env::Frame& frame);
std::string render_processed(const env::Frame& frame);

}  // namespace flaprl::cli
