#pragma once

#include <cstdint>
#include <vector>

namespace flaprl::qcore {

/// (1 - alpha) * q_old + alpha * (reward + gamma * max_next_q)
constexpr double q_update(double q_old, double reward, double max_next_q, double alpha, double gamma) noexcept {
    return (1.0 - alpha) * q_old + alpha * (reward + gamma * max_next_q);
}

/// Terminal transitions do not bootstrap.
constexpr double bootstrap_target(double reward, bool terminal, double gamma, double max_next_q) noexcept {
    return terminal ? reward : reward + gamma * max_next_q;
}

/// Index of the largest value; ties go to the lowest index.
template <class Range>
int argmax(const Range& values) {
    int best = 0;
    int i = 0;
    for (const auto& v : values) {
        if (v > values[best]) best = i;
        ++i;
    }
    return best;
}

struct Outcome {
    int next_state = 0;
    double reward = 0.0;
    bool terminal = false;
};

/// Deterministic finite MDP. Transitions are stored state-major.
class TabularMdp {
public:
    TabularMdp(int states, int actions, int start = 0);

    int state_count() const { return states_; }
    int action_count() const { return actions_; }
    int start() const { return start_; }

    void set(int state, int action, Outcome outcome);
    const Outcome& at(int state, int action) const;

    /// Throws ConfigError if any next state is out of range.
    void validate() const;

    /// Left-to-right chain of n states; action 1 advances, action 0 stays.
    /// Advancing out of the last state pays `final_reward` and terminates.
    static TabularMdp chain(int n, double final_reward = 1.0);

private:
    int states_;
    int actions_;
    int start_;
    std::vector<Outcome> table_;
};

/// Dense Q table; every entry starts at 0.
class QTable {
public:
    QTable() = default;
    QTable(int states, int actions) : actions_(actions), values_(static_cast<std::size_t>(states) * actions, 0.0) {}

    int state_count() const { return actions_ == 0 ? 0 : static_cast<int>(values_.size()) / actions_; }
    int action_count() const { return actions_; }

    double& operator()(int s, int a) { return values_[static_cast<std::size_t>(s) * actions_ + a]; }
    double operator()(int s, int a) const { return values_[static_cast<std::size_t>(s) * actions_ + a]; }

    double max_value(int s) const;
    int greedy_action(int s) const;

    const std::vector<double>& values() const { return values_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    int actions_ = 0;
    std::vector<double> values_;
};

double max_norm_distance(const QTable& a, const QTable& b);

/// Linear anneal from initial to final over anneal_steps, then constant.
struct EpsilonSchedule {
    double initial = 0.1;
    double final = 1e-4;
    std::uint64_t anneal_steps = 1'000'000;

    double value(std::uint64_t t) const noexcept {
        if (anneal_steps == 0 || t >= anneal_steps) return final;
        return initial - (initial - final) * (static_cast<double>(t) / static_cast<double>(anneal_steps));
    }

    /// Throws ConfigError unless initial >= final >= 0 and initial <= 1.
    void validate() const;

    friend bool operator==(const EpsilonSchedule&, const EpsilonSchedule&) = default;
};

struct LearningParams {
    double alpha = 0.1;
    double gamma = 0.9;
    EpsilonSchedule epsilon{0.2, 0.2, 0};
    /// Episodes longer than this are cut off (and not bootstrapped past).
    int max_episode_steps = 1000;

    void validate() const;
};

/// epsilon-greedy episodes from the start state; the schedule advances per
/// environment step across episodes.
QTable tabular_q_learning(const TabularMdp& mdp, const LearningParams& params, int episodes, std::uint64_t seed);

struct ValueIterationResult {
    QTable q;
    /// Max-norm change of each sweep.
    std::vector<double> deltas;
};

/// Sweeps the Bellman optimality operator until a sweep changes no entry by
/// `tolerance` or more.
ValueIterationResult value_iteration_trace(const TabularMdp& mdp, double gamma, double tolerance);

inline QTable value_iteration(const TabularMdp& mdp, double gamma, double tolerance) {
    return value_iteration_trace(mdp, gamma, tolerance).q;
}

std::vector<int> greedy_policy(const QTable& q);

}  // namespace flaprl::qcore
