#pragma once

#include <span>
#include <string>
#include <vector>

#include "ncc/graph.hpp"

namespace ncc::envs {

using Observations = std::vector<std::vector<double>>;

struct StepResult {
    Observations observations;
    double reward = 0.0;  // shared by every agent
    bool terminal = false;
};

/// Environment whose agents each pick one of a finite set of actions.
class DiscreteEnv {
public:
    virtual ~DiscreteEnv() = default;
    virtual std::size_t n_agents() const = 0;
    virtual std::size_t obs_dim(std::size_t agent) const = 0;
    virtual std::size_t n_actions(std::size_t agent) const = 0;
    virtual const AgentGraph& graph() const = 0;
    virtual Observations reset() = 0;
    virtual StepResult step(std::span<const std::size_t> actions) = 0;
};

/// Environment whose agents emit continuous split vectors: each agent's action
/// is a concatenation of probability simplices of the given widths.
class ContinuousEnv {
public:
    virtual ~ContinuousEnv() = default;
    virtual std::size_t n_agents() const = 0;
    virtual std::size_t obs_dim(std::size_t agent) const = 0;
    virtual std::vector<std::size_t> action_segments(std::size_t agent) const = 0;
    virtual const AgentGraph& graph() const = 0;
    virtual Observations reset() = 0;
    virtual StepResult step(const std::vector<std::vector<double>>& actions) = 0;
};

} // namespace ncc::envs
