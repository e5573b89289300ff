#pragma once

// Flow-level packet-routing network. Routers are agents; each router splits
// the demand of the commodities it sources across their candidate paths. The
// shared reward is 1 - MLU (maximum link utilization).

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ncc/envs/env.hpp"
#include "ncc/json_source.hpp"
#include "ncc/nn.hpp"

namespace ncc::envs {

inline constexpr std::size_t kUtilizationHistory = 10;

struct Link {
    std::size_t from = 0;
    std::size_t to = 0;
    double capacity = 1.0;
};

struct Commodity {
    std::size_t src = 0;
    std::size_t dst = 0;
    std::vector<std::vector<std::size_t>> paths;  // link ids
    double demand = 1.0;                           // mean demand per step
};

struct RoutingTopology {
    std::size_t routers = 0;
    std::vector<Link> links;
    std::vector<Commodity> commodities;
    double burst_factor = 0.0;  // 0 = constant demand, 1 = fully Poisson-modulated
    std::size_t horizon = 100;
    std::size_t control_cycle = 10;
    // Hand-written agent adjacency shipped alongside reconstructed topologies.
    std::optional<std::vector<std::pair<std::size_t, std::size_t>>> declared_agent_edges;

    /// Commodities sourced at `router`, ascending.
    std::vector<std::size_t> commodities_of(std::size_t router) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < commodities.size(); ++c)
            if (commodities[c].src == router) out.push_back(c);
        return out;
    }

    /// Links with `router` as either endpoint, ascending by id.
    std::vector<std::size_t> direct_links(std::size_t router) const {
        std::vector<std::size_t> out;
        for (std::size_t l = 0; l < links.size(); ++l)
            if (links[l].from == router || links[l].to == router) out.push_back(l);
        return out;
    }

    std::vector<std::size_t> action_segments(std::size_t router) const {
        std::vector<std::size_t> out;
        for (std::size_t c : commodities_of(router)) out.push_back(commodities[c].paths.size());
        return out;
    }

    std::size_t action_dim(std::size_t router) const {
        std::size_t n = 0;
        for (auto w : action_segments(router)) n += w;
        return n;
    }

    /// n_commodities(i) + 10·n_direct_links + n_direct_links + n_action_dims
    std::size_t obs_dim(std::size_t router) const {
        const auto links_i = direct_links(router).size();
        return commodities_of(router).size() + kUtilizationHistory * links_i + links_i + action_dim(router);
    }

    double max_capacity() const {
        double hi = 0.0;
        for (const auto& l : links) hi = std::max(hi, l.capacity);
        return hi;
    }

    /// Throws a config error describing the first violated invariant.
    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, "routing topology: " + msg); };
        if (routers == 0) fail("needs at least one router");
        for (std::size_t l = 0; l < links.size(); ++l) {
            if (links[l].from >= routers || links[l].to >= routers)
                fail("link " + std::to_string(l) + " references an unknown router");
            if (!(links[l].capacity > 0.0)) fail("link " + std::to_string(l) + " capacity must be positive");
        }
        for (std::size_t c = 0; c < commodities.size(); ++c) {
            const auto& com = commodities[c];
            if (com.src >= routers || com.dst >= routers)
                fail("commodity " + std::to_string(c) + " references an unknown router");
            if (com.paths.empty()) fail("commodity " + std::to_string(c) + " has no candidate path");
            if (!(com.demand >= 0.0)) fail("commodity " + std::to_string(c) + " demand must be non-negative");
            for (std::size_t p = 0; p < com.paths.size(); ++p) {
                const auto& path = com.paths[p];
                const std::string where = "commodity " + std::to_string(c) + " path " + std::to_string(p);
                if (path.empty()) fail(where + " is empty");
                std::size_t at = com.src;
                for (std::size_t l : path) {
                    if (l >= links.size()) fail(where + " references unknown link " + std::to_string(l));
                    if (links[l].from != at) fail(where + " is not a connected link sequence");
                    at = links[l].to;
                }
                if (at != com.dst) fail(where + " does not end at the commodity's sink");
            }
        }
        if (!(burst_factor >= 0.0 && burst_factor <= 1.0)) fail("burst_factor must lie in [0, 1]");
        if (horizon == 0) fail("horizon must be positive");
        if (control_cycle == 0) fail("control_cycle must be positive");
    }
};

/// Loads a routing topology from JSON:
///   {routers, links: [{from, to, capacity}],
///    commodities: [{src, dst, paths: [[link ids]], demand?}],
///    burst_factor?, horizon?, control_cycle?, agent_edges?: [[a, b]]}
inline RoutingTopology load_routing_topology(const JsonSource& src) {
    ObjectReader top(src, JsonPointer{}, {"routers", "links", "commodities", "burst_factor", "horizon",
                                          "control_cycle", "agent_edges", "description"});
    RoutingTopology t;
    t.routers = top.count("routers");
    if (t.routers == 0) top.fail("routers", "needs at least one router");
    for (std::size_t l = 0; l < top.array_size("links"); ++l) {
        ObjectReader link(src, top.child("links") / l, {"from", "to", "capacity"});
        Link out{link.count("from"), link.count("to"), link.number("capacity")};
        if (out.from >= t.routers) link.fail("from", "unknown router " + std::to_string(out.from));
        if (out.to >= t.routers) link.fail("to", "unknown router " + std::to_string(out.to));
        if (!(out.capacity > 0.0)) link.fail("capacity", "capacity must be positive");
        t.links.push_back(out);
    }
    for (std::size_t c = 0; c < top.array_size("commodities"); ++c) {
        ObjectReader com(src, top.child("commodities") / c, {"src", "dst", "paths", "demand"});
        Commodity out;
        out.src = com.count("src");
        out.dst = com.count("dst");
        out.demand = com.number("demand", 1.0);
        if (out.src >= t.routers) com.fail("src", "unknown router");
        if (out.dst >= t.routers) com.fail("dst", "unknown router");
        if (out.demand < 0.0) com.fail("demand", "must be non-negative");
        const auto n_paths = com.array_size("paths");
        if (n_paths == 0) com.fail("paths", "needs at least one candidate path");
        for (std::size_t p = 0; p < n_paths; ++p) {
            const auto ptr = com.child("paths") / p;
            const Json& path = src.root().at(ptr);
            if (!path.is_array() || path.empty()) src.fail(ptr, "path must be a non-empty array of link ids");
            std::vector<std::size_t> ids;
            std::size_t at = out.src;
            for (std::size_t k = 0; k < path.size(); ++k) {
                if (!path[k].is_number_unsigned()) src.fail(ptr / k, "expected a link id");
                const auto id = path[k].get<std::size_t>();
                if (id >= t.links.size()) src.fail(ptr / k, "unknown link " + std::to_string(id));
                if (t.links[id].from != at) src.fail(ptr / k, "link " + std::to_string(id) + " does not continue the path");
                at = t.links[id].to;
                ids.push_back(id);
            }
            if (at != out.dst) src.fail(ptr, "path does not end at dst");
            out.paths.push_back(std::move(ids));
        }
        t.commodities.push_back(std::move(out));
    }
    t.burst_factor = top.number("burst_factor", 0.0);
    if (t.burst_factor < 0.0 || t.burst_factor > 1.0) top.fail("burst_factor", "must lie in [0, 1]");
    t.horizon = top.count("horizon", 100);
    t.control_cycle = top.count("control_cycle", 10);
    if (t.horizon == 0) top.fail("horizon", "must be positive");
    if (t.control_cycle == 0) top.fail("control_cycle", "must be positive");
    if (top.has("agent_edges")) {
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t e = 0; e < top.array_size("agent_edges"); ++e) {
            const auto ptr = top.child("agent_edges") / e;
            const Json& pair = src.root().at(ptr);
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() || !pair[1].is_number_unsigned())
                src.fail(ptr, "expected [a, b]");
            edges.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
            if (edges.back().first >= t.routers || edges.back().second >= t.routers) src.fail(ptr, "unknown router");
        }
        t.declared_agent_edges = std::move(edges);
    }
    t.validate();
    return t;
}

inline RoutingTopology load_routing_topology(const std::string& path) {
    return load_routing_topology(JsonSource::from_file(path));
}

/// Routers are neighbors iff some direct link connects them.
inline AgentGraph derive_neighborhoods(const RoutingTopology& topology) {
    AgentGraph g(topology.routers);
    for (const auto& l : topology.links) g.connect(l.from, l.to);
    return g;
}

/// max over links of load / capacity.
inline double mlu(std::span<const double> loads, std::span<const double> capacities) {
    if (loads.size() != capacities.size())
        throw Error(ErrorKind::shape_mismatch, "mlu: loads and capacities differ in length");
    double worst = 0.0;
    for (std::size_t l = 0; l < loads.size(); ++l) {
        if (!(capacities[l] > 0.0)) throw Error(ErrorKind::config, "link " + std::to_string(l) + " has non-positive capacity");
        worst = std::max(worst, loads[l] / capacities[l]);
    }
    return worst;
}

class RoutingEnv final : public ContinuousEnv {
public:
    RoutingEnv(RoutingTopology topology, std::uint64_t seed)
        : topology_(std::move(topology)), graph_(derive_neighborhoods(topology_)), rng_(make_stream(seed, StreamId::env)) {
        topology_.validate();
        for (const auto& l : topology_.links) capacities_.push_back(l.capacity);
        demand_scale_ = topology_.max_capacity() > 0 ? topology_.max_capacity() : 1.0;
        reset();
    }

    const RoutingTopology& topology() const { return topology_; }
    std::size_t n_agents() const override { return topology_.routers; }
    std::size_t obs_dim(std::size_t agent) const override { return topology_.obs_dim(agent); }
    std::vector<std::size_t> action_segments(std::size_t agent) const override {
        return topology_.action_segments(agent);
    }
    const AgentGraph& graph() const override { return graph_; }

    Observations reset() override {
        t_ = 0;
        cycle_step_ = 0;
        history_.assign(topology_.links.size(), {});
        cycle_sum_.assign(topology_.links.size(), 0.0);
        cycle_avg_.assign(topology_.links.size(), 0.0);
        loads_.assign(topology_.links.size(), 0.0);
        last_actions_.clear();
        for (std::size_t r = 0; r < topology_.routers; ++r) last_actions_.push_back(uniform_split(r));
        draw_demands();
        return observe_all();
    }

    StepResult step(const std::vector<std::vector<double>>& actions) override {
        if (actions.size() != topology_.routers)
            throw Error(ErrorKind::invalid_argument, "routing step needs one action per router");
        for (std::size_t r = 0; r < topology_.routers; ++r) check_simplex(r, actions[r]);

        std::fill(loads_.begin(), loads_.end(), 0.0);
        assigned_.assign(topology_.commodities.size(), 0.0);
        for (std::size_t r = 0; r < topology_.routers; ++r) {
            std::size_t offset = 0;
            for (std::size_t c : topology_.commodities_of(r)) {
                const auto& com = topology_.commodities[c];
                for (std::size_t p = 0; p < com.paths.size(); ++p) {
                    const double flow = demands_[c] * actions[r][offset + p];
                    assigned_[c] += flow;
                    for (std::size_t l : com.paths[p]) loads_[l] += flow;
                }
                offset += com.paths.size();
            }
        }
        const double worst = mlu(loads_, capacities_);
        for (std::size_t l = 0; l < loads_.size(); ++l) {
            auto& h = history_[l];
            std::rotate(h.rbegin(), h.rbegin() + 1, h.rend());
            h[0] = loads_[l] / capacities_[l];
            cycle_sum_[l] += h[0];
        }
        if (++cycle_step_ == topology_.control_cycle) {
            for (std::size_t l = 0; l < loads_.size(); ++l) {
                cycle_avg_[l] = cycle_sum_[l] / static_cast<double>(topology_.control_cycle);
                cycle_sum_[l] = 0.0;
            }
            cycle_step_ = 0;
        }
        last_actions_ = actions;
        ++t_;
        injected_.assign(demands_.begin(), demands_.end());
        draw_demands();
        return {observe_all(), 1.0 - worst, t_ >= topology_.horizon};
    }

    /// Fixed layout: [own commodity demands / max capacity]
    ///   ++ [per direct link, newest first: utilization over the last 10 steps]
    ///   ++ [per direct link: mean utilization over the last completed control cycle]
    ///   ++ [latest own action].
    std::vector<double> observe(std::size_t router) const {
        std::vector<double> out;
        out.reserve(topology_.obs_dim(router));
        for (std::size_t c : topology_.commodities_of(router)) out.push_back(demands_[c] / demand_scale_);
        const auto direct = topology_.direct_links(router);
        for (std::size_t l : direct) out.insert(out.end(), history_[l].begin(), history_[l].end());
        for (std::size_t l : direct) out.push_back(cycle_avg_[l]);
        out.insert(out.end(), last_actions_[router].begin(), last_actions_[router].end());
        return out;
    }

    Observations observe_all() const {
        Observations out;
        for (std::size_t r = 0; r < topology_.routers; ++r) out.push_back(observe(r));
        return out;
    }

    std::span<const double> link_loads() const { return loads_; }
    std::span<const double> pending_demands() const { return demands_; }
    /// Demand routed in the most recent step and the flow assigned to paths.
    std::span<const double> injected_demands() const { return injected_; }
    std::span<const double> assigned_flow() const { return assigned_; }

    std::vector<double> uniform_split(std::size_t router) const {
        std::vector<double> out;
        for (std::size_t w : topology_.action_segments(router))
            for (std::size_t k = 0; k < w; ++k) out.push_back(1.0 / static_cast<double>(w));
        return out;
    }

private:
    void check_simplex(std::size_t router, const std::vector<double>& action) const {
        const auto segments = topology_.action_segments(router);
        std::size_t expected = 0;
        for (auto w : segments) expected += w;
        if (action.size() != expected)
            throw Error(ErrorKind::invalid_argument, "router " + std::to_string(router) + " action has " +
                                                         std::to_string(action.size()) + " entries, expected " +
                                                         std::to_string(expected));
        std::size_t offset = 0;
        for (auto w : segments) {
            double total = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
                const double v = action[offset + k];
                if (!(v >= -1e-9)) throw Error(ErrorKind::invalid_argument, "router " + std::to_string(router) + " split fraction is negative");
                total += v;
            }
            if (std::abs(total - 1.0) > 1e-6)
                throw Error(ErrorKind::invalid_argument, "router " + std::to_string(router) +
                                                             " split fractions sum to " + std::to_string(total));
            offset += w;
        }
    }

    void draw_demands() {
        demands_.resize(topology_.commodities.size());
        std::poisson_distribution<int> bursts(1.0);
        const double b = topology_.burst_factor;
        for (std::size_t c = 0; c < demands_.size(); ++c) {
            const double mean = topology_.commodities[c].demand;
            demands_[c] = b > 0.0 ? mean * ((1.0 - b) + b * static_cast<double>(bursts(rng_))) : mean;
        }
    }

    RoutingTopology topology_;
    AgentGraph graph_;
    std::mt19937_64 rng_;
    std::vector<double> capacities_;
    double demand_scale_ = 1.0;
    std::size_t t_ = 0;
    std::size_t cycle_step_ = 0;
    std::vector<std::array<double, kUtilizationHistory>> history_;
    std::vector<double> cycle_sum_, cycle_avg_;
    std::vector<double> loads_;
    std::vector<double> demands_, injected_, assigned_;
    std::vector<std::vector<double>> last_actions_;
};

} // namespace ncc::envs
