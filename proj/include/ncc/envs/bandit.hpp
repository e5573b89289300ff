#pragma once

#include <span>

#include "ncc/envs/env.hpp"

namespace ncc::envs {

/// Single-state cooperative matrix game: every agent sees the constant
/// observation [1] and the team is rewarded 1 only when all agents pick
/// action 0. Each episode is one step.
class CoordinationBandit final : public DiscreteEnv {
public:
    explicit CoordinationBandit(std::size_t agents = 2, std::size_t actions = 2)
        : agents_(agents), actions_(actions), graph_(AgentGraph::complete(agents)) {}

    std::size_t n_agents() const override { return agents_; }
    std::size_t obs_dim(std::size_t) const override { return 1; }
    std::size_t n_actions(std::size_t) const override { return actions_; }
    const AgentGraph& graph() const override { return graph_; }

    Observations reset() override { return Observations(agents_, std::vector<double>{1.0}); }

    StepResult step(std::span<const std::size_t> actions) override {
        if (actions.size() != agents_) throw Error(ErrorKind::invalid_argument, "bandit: one action per agent required");
        bool all_zero = true;
        for (auto a : actions) {
            if (a >= actions_) throw Error(ErrorKind::invalid_argument, "bandit: action out of range");
            all_zero = all_zero && a == 0;
        }
        return {reset(), all_zero ? 1.0 : 0.0, true};
    }

private:
    std::size_t agents_;
    std::size_t actions_;
    AgentGraph graph_;
};

} // namespace ncc::envs
