#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "flaprl/cli/commands.hpp"

using namespace flaprl;
using namespace flaprl::cli;

int main(int argc, char** argv) {
    CLI::App app{"Flappy Bird reinforcement learning: DQN and A3C trainers"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train a DQN or A3C agent");
    std::string algo;
    std::optional<std::string> train_config, train_out;
    std::optional<std::uint64_t> train_seed;
    train->add_option("algorithm", algo, "dqn or a3c")->required()->check(CLI::IsMember({"dqn", "a3c"}));
    train->add_option("--config", train_config, "config file (key = value lines)");
    train->add_option("--out", train_out, "output directory (overrides run.out)");
    train->add_option("--seed", train_seed, "seed for both trainers");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a built-in baseline");
    EvalOptions eo;
    bool oracle = false, random = false;
    eval->add_option("--checkpoint", eo.checkpoint, "checkpoint file");
    eval->add_option("--episodes", eo.episodes, "episodes to play")->required()->check(CLI::PositiveNumber);
    eval->add_option("--seed", eo.seed, "evaluation seed");
    eval->add_flag("--baseline-oracle", oracle, "use the scripted oracle controller");
    eval->add_flag("--baseline-random", random, "use a uniform random controller");
    eval->add_option("--config", eo.config, "config file for the environment and eval.max_steps");
    eval->add_option("--out", eo.csv, "per-episode CSV path");
    eval->add_option("--epsilon", eo.mode.epsilon, "DQN: act randomly with this probability")
        ->check(CLI::Range(0.0, 1.0));
    eval->add_flag("--sample", eo.mode.sample, "A3C: sample actions from the policy");

    auto* dump = app.add_subcommand("dump-frames", "print raw and preprocessed frames as text");
    std::optional<std::string> dump_config;
    int steps = 1;
    std::uint64_t dump_seed = 0;
    std::string policy_name;
    const std::map<std::string, DumpPolicy> policies{
        {"noflap", DumpPolicy::noflap}, {"random", DumpPolicy::random}, {"oracle", DumpPolicy::oracle}};
    dump->add_option("--config", dump_config, "config file");
    dump->add_option("--steps", steps, "steps to render")->required()->check(CLI::NonNegativeNumber);
    dump->add_option("--policy", policy_name, "noflap, random or oracle")
        ->required()
        ->transform(CLI::IsMember({"noflap", "random", "oracle"}, CLI::ignore_case));
    dump->add_option("--seed", dump_seed, "environment seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bad_config;
    }

    if (train->parsed()) {
        return cmd_train(algo == "dqn" ? Algorithm::dqn : Algorithm::a3c, train_config, train_out, train_seed,
                         std::cout, std::cerr);
    }
    if (eval->parsed()) {
        if (oracle && random) {
            std::cerr << "choose at most one baseline flag\n";
            return bad_config;
        }
        eo.controller = oracle ? Controller::oracle : random ? Controller::random : Controller::network;
        return cmd_eval(eo, std::cout, std::cerr);
    }
    return cmd_dump_frames(dump_config, steps, policies.at(policy_name), dump_seed, std::cout, std::cerr);
}
