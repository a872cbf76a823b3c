#include "flaprl/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flaprl/error.hpp"
#include "flaprl/rng.hpp"

namespace flaprl::qcore {

TabularMdp::TabularMdp(int states, int actions, int start)
    : states_(states), actions_(actions), start_(start) {
    if (states < 1 || actions < 1) throw ConfigError("TabularMdp needs at least one state and one action");
    if (start < 0 || start >= states) throw ConfigError("TabularMdp start state out of range");
    table_.assign(static_cast<std::size_t>(states) * actions, Outcome{});
    for (int s = 0; s < states; ++s)
        for (int a = 0; a < actions; ++a) table_[static_cast<std::size_t>(s) * actions + a].next_state = s;
}

void TabularMdp::set(int state, int action, Outcome outcome) {
    if (state < 0 || state >= states_ || action < 0 || action >= actions_)
        throw ConfigError("TabularMdp::set index out of range");
    table_[static_cast<std::size_t>(state) * actions_ + action] = outcome;
}

const Outcome& TabularMdp::at(int state, int action) const {
    return table_[static_cast<std::size_t>(state) * actions_ + action];
}

void TabularMdp::validate() const {
    for (const Outcome& o : table_) {
        if (o.next_state < 0 || o.next_state >= states_)
            throw ConfigError("TabularMdp next state " + std::to_string(o.next_state) + " out of range");
        if (!std::isfinite(o.reward)) throw ConfigError("TabularMdp reward must be finite");
    }
}

TabularMdp TabularMdp::chain(int n, double final_reward) {
    TabularMdp m(n, 2, 0);
    for (int s = 0; s < n; ++s) {
        m.set(s, 0, {s, 0.0, false});
        if (s + 1 < n) {
            m.set(s, 1, {s + 1, 0.0, false});
        } else {
            m.set(s, 1, {s, final_reward, true});
        }
    }
    return m;
}

double QTable::max_value(int s) const {
    double best = (*this)(s, 0);
    for (int a = 1; a < actions_; ++a) best = std::max(best, (*this)(s, a));
    return best;
}

int QTable::greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < actions_; ++a)
        if ((*this)(s, a) > (*this)(s, best)) best = a;
    return best;
}

double max_norm_distance(const QTable& a, const QTable& b) {
    if (a.values().size() != b.values().size()) throw DimensionError("QTable sizes differ");
    double d = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    return d;
}

void EpsilonSchedule::validate() const {
    if (!(initial <= 1.0 && initial >= final && final >= 0.0))
        throw ConfigError("epsilon schedule needs 1 >= initial >= final >= 0");
}

void LearningParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (max_episode_steps < 1) throw ConfigError("max_episode_steps must be positive");
    epsilon.validate();
}

QTable tabular_q_learning(const TabularMdp& mdp, const LearningParams& params, int episodes, std::uint64_t seed) {
    mdp.validate();
    params.validate();
    if (episodes < 1) throw ConfigError("tabular_q_learning needs at least one episode");

    QTable q(mdp.state_count(), mdp.action_count());
    Rng rng(seed);
    std::uint64_t t = 0;
    for (int e = 0; e < episodes; ++e) {
        int s = mdp.start();
        for (int k = 0; k < params.max_episode_steps; ++k, ++t) {
            int a = q.greedy_action(s);
            if (rng.bernoulli(params.epsilon.value(t)))
                a = static_cast<int>(rng.below(static_cast<std::uint64_t>(mdp.action_count())));
            const Outcome& o = mdp.at(s, a);
            const double next = o.terminal ? 0.0 : q.max_value(o.next_state);
            q(s, a) = q_update(q(s, a), o.reward, next, params.alpha, params.gamma);
            if (o.terminal) break;
            s = o.next_state;
        }
    }
    return q;
}

ValueIterationResult value_iteration_trace(const TabularMdp& mdp, double gamma, double tolerance) {
    mdp.validate();
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");

    ValueIterationResult r{QTable(mdp.state_count(), mdp.action_count()), {}};
    for (;;) {
        QTable next(mdp.state_count(), mdp.action_count());
        for (int s = 0; s < mdp.state_count(); ++s) {
            for (int a = 0; a < mdp.action_count(); ++a) {
                const Outcome& o = mdp.at(s, a);
                next(s, a) = bootstrap_target(o.reward, o.terminal, gamma, r.q.max_value(o.next_state));
            }
        }
        const double delta = max_norm_distance(next, r.q);
        r.q = std::move(next);
        r.deltas.push_back(delta);
        if (delta < tolerance) break;
    }
    return r;
}

std::vector<int> greedy_policy(const QTable& q) {
    std::vector<int> p(static_cast<std::size_t>(q.state_count()));
    for (int s = 0; s < q.state_count(); ++s) p[static_cast<std::size_t>(s)] = q.greedy_action(s);
    return p;
}

}  // namespace flaprl::qcore
