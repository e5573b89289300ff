#pragma once

// Synthetic wifi power-configuration grid. Each access point picks an integer
// transmit power in [10, 30]. Its clients' signal grows with its own power and
// is degraded by interference from nearby APs; the shared reward is the mean
// per-AP signal quality normalized into [0, 1].

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ncc/envs/env.hpp"
#include "ncc/json_source.hpp"
#include "ncc/nn.hpp"

namespace ncc::envs {

inline constexpr int kMinPower = 10;
inline constexpr int kMaxPower = 30;
inline constexpr std::size_t kPowerLevels = kMaxPower - kMinPower + 1;
inline constexpr std::size_t kWifiObsDim = 9;

struct AccessPoint {
    std::size_t id = 0;
    double x = 0.0;
    double y = 0.0;
};

struct WifiTopology {
    std::vector<AccessPoint> aps;
    double cutoff_radius = 1.0;
    std::size_t channels = 1;
    double interference_scale = 1.0;
    double load_mean = 5.0;  // mean associated users per AP
    std::size_t horizon = 100;

    std::size_t channel(std::size_t ap) const { return ap % channels; }

    double distance(std::size_t a, std::size_t b) const {
        return std::hypot(aps[a].x - aps[b].x, aps[a].y - aps[b].y);
    }

    /// Symmetric coefficient in [0, 1]: linear decay with distance, zero at or
    /// beyond the cutoff radius, attenuated by channel separation.
    double interference(std::size_t a, std::size_t b) const {
        if (a == b) return 0.0;
        const double d = distance(a, b);
        if (d >= cutoff_radius) return 0.0;
        const double sep = std::abs(static_cast<double>(channel(a)) - static_cast<double>(channel(b)));
        return (1.0 - d / cutoff_radius) / (1.0 + sep);
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, "wifi topology: " + msg); };
        if (aps.empty()) fail("needs at least one access point");
        for (std::size_t i = 0; i < aps.size(); ++i)
            if (aps[i].id != i) fail("access point ids must be 0..n-1 in order");
        if (!(cutoff_radius > 0.0)) fail("cutoff_radius must be positive");
        if (channels == 0) fail("channels must be positive");
        if (!(interference_scale >= 0.0)) fail("interference_scale must be non-negative");
        if (!(load_mean >= 0.0)) fail("load_mean must be non-negative");
        if (horizon == 0) fail("horizon must be positive");
    }
};

/// {aps: [{id, x, y}], cutoff_radius, channels, interference_scale?, load_mean?, horizon?}
inline WifiTopology load_wifi_topology(const JsonSource& src) {
    ObjectReader top(src, JsonPointer{},
                     {"aps", "cutoff_radius", "channels", "interference_scale", "load_mean", "horizon", "description"});
    WifiTopology t;
    for (std::size_t i = 0; i < top.array_size("aps"); ++i) {
        ObjectReader ap(src, top.child("aps") / i, {"id", "x", "y"});
        AccessPoint out{ap.count("id"), ap.number("x"), ap.number("y")};
        if (out.id != i) ap.fail("id", "ids must be 0..n-1 in order");
        t.aps.push_back(out);
    }
    if (t.aps.empty()) top.fail("aps", "needs at least one access point");
    t.cutoff_radius = top.number("cutoff_radius");
    if (!(t.cutoff_radius > 0.0)) top.fail("cutoff_radius", "must be positive");
    t.channels = top.count("channels");
    if (t.channels == 0) top.fail("channels", "must be positive");
    t.interference_scale = top.number("interference_scale", 1.0);
    if (t.interference_scale < 0.0) top.fail("interference_scale", "must be non-negative");
    t.load_mean = top.number("load_mean", 5.0);
    if (t.load_mean < 0.0) top.fail("load_mean", "must be non-negative");
    t.horizon = top.count("horizon", 100);
    if (t.horizon == 0) top.fail("horizon", "must be positive");
    t.validate();
    return t;
}

inline WifiTopology load_wifi_topology(const std::string& path) {
    return load_wifi_topology(JsonSource::from_file(path));
}

/// APs are neighbors iff they lie strictly within the interference cutoff.
inline AgentGraph derive_neighborhoods(const WifiTopology& topology) {
    AgentGraph g(topology.aps.size());
    for (std::size_t a = 0; a < topology.aps.size(); ++a)
        for (std::size_t b = a + 1; b < topology.aps.size(); ++b)
            if (topology.distance(a, b) < topology.cutoff_radius) g.connect(a, b);
    return g;
}

/// Per-AP signal quality in [0, 1] for a joint power assignment.
inline std::vector<double> wifi_quality(const WifiTopology& topology, std::span<const int> powers) {
    const std::size_t n = topology.aps.size();
    if (powers.size() != n) throw Error(ErrorKind::invalid_argument, "wifi: one power per access point required");
    for (std::size_t i = 0; i < n; ++i)
        if (powers[i] < kMinPower || powers[i] > kMaxPower)
            throw Error(ErrorKind::invalid_argument, "access point " + std::to_string(i) + " power " +
                                                         std::to_string(powers[i]) + " outside [10, 30]");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double coupling = 0.0, interference = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = topology.interference_scale * topology.interference(i, j);
            coupling += c;
            interference += c * powers[j];
        }
        const double rssi = powers[i] - interference;
        const double lo = kMinPower - coupling * kMaxPower;
        const double hi = kMaxPower - coupling * kMinPower;
        out[i] = (rssi - lo) / (hi - lo);
    }
    return out;
}

inline double wifi_reward(const WifiTopology& topology, std::span<const int> powers) {
    const auto q = wifi_quality(topology, powers);
    double acc = 0.0;
    for (double v : q) acc += v;
    return acc / static_cast<double>(q.size());
}

class WifiEnv final : public DiscreteEnv {
public:
    WifiEnv(WifiTopology topology, std::uint64_t seed)
        : topology_(std::move(topology)), graph_(derive_neighborhoods(topology_)), rng_(make_stream(seed, StreamId::env)) {
        topology_.validate();
        reset();
    }

    const WifiTopology& topology() const { return topology_; }
    std::size_t n_agents() const override { return topology_.aps.size(); }
    std::size_t obs_dim(std::size_t) const override { return kWifiObsDim; }
    std::size_t n_actions(std::size_t) const override { return kPowerLevels; }
    const AgentGraph& graph() const override { return graph_; }

    static int power_of(std::size_t action) { return kMinPower + static_cast<int>(action); }

    Observations reset() override {
        t_ = 0;
        powers_.assign(n_agents(), (kMinPower + kMaxPower) / 2);
        draw_users();
        return observe_all();
    }

    StepResult step(std::span<const std::size_t> actions) override {
        if (actions.size() != n_agents()) throw Error(ErrorKind::invalid_argument, "wifi: one action per AP required");
        std::vector<int> powers(actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i) {
            if (actions[i] >= kPowerLevels)
                throw Error(ErrorKind::invalid_argument, "wifi: action index " + std::to_string(actions[i]) + " out of range");
            powers[i] = power_of(actions[i]);
        }
        return step_powers(powers);
    }

    StepResult step_powers(std::span<const int> powers) {
        const double reward = wifi_reward(topology_, powers);
        powers_.assign(powers.begin(), powers.end());
        ++t_;
        draw_users();
        return {observe_all(), reward, t_ >= topology_.horizon};
    }

    /// Nine telemetry-shaped fields, each scaled to roughly [0, 1]:
    /// frequency, bandwidth, loss rate, band index, users, download volume,
    /// upload rate, download rate, latency.
    std::vector<double> observe(std::size_t ap) const {
        const auto quality = wifi_quality(topology_, powers_);
        double interference = 0.0;
        for (std::size_t j = 0; j < n_agents(); ++j)
            interference += topology_.interference_scale * topology_.interference(ap, j) * powers_[j];
        const double own = powers_[ap];
        const double band = topology_.channels > 1
                                ? static_cast<double>(topology_.channel(ap)) / static_cast<double>(topology_.channels - 1)
                                : 0.0;
        const double load = topology_.load_mean > 0 ? users_[ap] / (2.0 * topology_.load_mean) : 0.0;
        const double q = quality[ap];
        return {
            0.5 + 0.5 * band,                    // radio frequency
            0.2,                                 // bandwidth (20 MHz of 100)
            interference / (own + interference), // loss rate
            band,                                // band number
            load,                                // associated users
            load * q,                            // download volume
            0.5 * q,                             // upload rate
            q,                                   // download rate
            1.0 - q,                             // latency
        };
    }

    Observations observe_all() const {
        Observations out;
        for (std::size_t i = 0; i < n_agents(); ++i) out.push_back(observe(i));
        return out;
    }

private:
    void draw_users() {
        users_.resize(n_agents());
        std::poisson_distribution<int> users(topology_.load_mean > 0 ? topology_.load_mean : 1.0);
        for (auto& u : users_) u = topology_.load_mean > 0 ? users(rng_) : 0;
    }

    WifiTopology topology_;
    AgentGraph graph_;
    std::mt19937_64 rng_;
    std::size_t t_ = 0;
    std::vector<int> powers_;
    std::vector<int> users_;
};

} // namespace ncc::envs
