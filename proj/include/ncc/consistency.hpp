#pragma once

#include <optional>
#include <vector>

#include "ncc/cognition.hpp"
#include "ncc/graph.hpp"

namespace ncc {

/// Mean of KL(q_i ‖ q_j) over ordered neighbor pairs, from batch latents.
/// Agents without a latent (nullopt) are skipped. Returns 0 with no pairs.
inline double mean_neighbor_kl(const AgentGraph& graph, const std::vector<std::optional<GaussianLatent>>& latents) {
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (!latents[i]) continue;
        for (std::size_t j : graph.neighbors(i)) {
            if (!latents[j]) continue;
            acc += kl_diag_gaussians(latents[i]->detached(), latents[j]->detached()).item();
            ++pairs;
        }
    }
    return pairs == 0 ? 0.0 : acc / static_cast<double>(pairs);
}

} // namespace ncc
