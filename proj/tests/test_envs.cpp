#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <set>

#include "ncc/envs/bandit.hpp"
#include "ncc/envs/routing.hpp"
#include "ncc/envs/wifi.hpp"

using namespace ncc;
using namespace ncc::envs;

namespace {

const std::string kTopologies = NCC_SOURCE_DIR "/configs/topologies/";

RoutingTopology two_path(double demand, double burst = 0.0) {
    RoutingTopology t;
    t.routers = 2;
    t.links = {{0, 1, 10.0}, {0, 1, 10.0}};
    t.commodities = {{0, 1, {{0}, {1}}, demand}};
    t.burst_factor = burst;
    t.horizon = 5;
    return t;
}

} // namespace

TEST(Mlu, Basics) {
    std::vector<double> caps{10, 5, 2};
    EXPECT_EQ(mlu(caps, caps), 1.0);
    std::vector<double> zero(3, 0.0);
    EXPECT_EQ(mlu(zero, caps), 0.0);
    std::vector<double> bad{1, 0, 1};
    EXPECT_THROW(mlu(zero, bad), Error);
}

TEST(Mlu, MatchesNaiveLoop) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> loads(7), caps(7);
        for (auto& v : loads) v = u(rng);
        for (auto& v : caps) v = u(rng);
        double ref = 0.0;
        for (std::size_t l = 0; l < 7; ++l)
            if (loads[l] / caps[l] > ref) ref = loads[l] / caps[l];
        EXPECT_EQ(mlu(loads, caps), ref);
    }
}

TEST(RoutingStep, ZeroDemandGivesFullReward) {
    RoutingEnv env(two_path(0.0), 1);
    auto r = env.step({{0.3, 0.7}, {}});
    EXPECT_EQ(r.reward, 1.0);
}

TEST(RoutingStep, SaturatedPathGivesZeroReward) {
    RoutingEnv env(two_path(10.0), 1);
    EXPECT_EQ(env.step({{1.0, 0.0}, {}}).reward, 0.0);
}

TEST(RoutingStep, BalancedSplitHandAccounting) {
    RoutingEnv env(two_path(10.0), 1);
    auto r = env.step({{0.5, 0.5}, {}});
    EXPECT_DOUBLE_EQ(r.reward, 0.5);
    EXPECT_EQ(env.link_loads()[0], 5.0);
    EXPECT_EQ(env.link_loads()[1], 5.0);
}

TEST(RoutingStep, InvalidSimplexRejected) {
    RoutingEnv env(two_path(10.0), 1);
    EXPECT_THROW(env.step({{0.7, 0.7}, {}}), Error);
    EXPECT_THROW(env.step({{1.2, -0.2}, {}}), Error);
    EXPECT_THROW(env.step({{1.0}, {}}), Error);
}

TEST(RoutingStep, HorizonTerminates) {
    RoutingEnv env(two_path(1.0), 1);
    for (int t = 0; t < 4; ++t) EXPECT_FALSE(env.step({{0.5, 0.5}, {}}).terminal);
    EXPECT_TRUE(env.step({{0.5, 0.5}, {}}).terminal);
}

TEST(RoutingStep, FlowConservationAndRewardBound) {
    auto topo = load_routing_topology(kTopologies + "routing_12.json");
    RoutingEnv env(topo, 3);
    std::mt19937_64 rng(4);
    std::gamma_distribution<double> g(1.0, 1.0);
    for (int step = 0; step < 200; ++step) {
        std::vector<std::vector<double>> actions;
        for (std::size_t r = 0; r < topo.routers; ++r) {
            std::vector<double> a;
            for (auto w : topo.action_segments(r)) {
                std::vector<double> seg(w);
                double total = 0.0;
                for (auto& v : seg) total += (v = g(rng));
                for (auto& v : seg) a.push_back(v / total);
            }
            actions.push_back(a);
        }
        auto res = env.step(actions);
        EXPECT_LE(res.reward, 1.0);
        for (std::size_t c = 0; c < topo.commodities.size(); ++c)
            EXPECT_NEAR(env.injected_demands()[c], env.assigned_flow()[c], 1e-9);
        if (res.terminal) env.reset();
    }
}

TEST(RoutingStep, SeededDemandsReplayBitIdentically) {
    auto topo = two_path(10.0, 0.8);
    RoutingEnv a(topo, 42), b(topo, 42), c(topo, 43);
    bool differs = false;
    for (int t = 0; t < 5; ++t) {
        auto ra = a.step({{0.5, 0.5}, {}});
        auto rb = b.step({{0.5, 0.5}, {}});
        auto rc = c.step({{0.5, 0.5}, {}});
        EXPECT_EQ(ra.reward, rb.reward);
        EXPECT_EQ(ra.observations, rb.observations);
        differs = differs || ra.reward != rc.reward;
    }
    EXPECT_TRUE(differs);
}

TEST(RoutingObserve, FreshResetAndLength) {
    auto topo = load_routing_topology(kTopologies + "routing_6.json");
    RoutingEnv env(topo, 1);
    for (std::size_t r = 0; r < topo.routers; ++r) {
        auto o = env.observe(r);
        const auto n_c = topo.commodities_of(r).size();
        const auto n_l = topo.direct_links(r).size();
        const auto n_a = topo.action_dim(r);
        ASSERT_EQ(o.size(), n_c + 10 * n_l + n_l + n_a);
        for (std::size_t k = n_c; k < n_c + 11 * n_l; ++k) EXPECT_EQ(o[k], 0.0);
        std::size_t k = n_c + 11 * n_l;
        for (auto w : topo.action_segments(r))
            for (std::size_t p = 0; p < w; ++p) EXPECT_DOUBLE_EQ(o[k++], 1.0 / w);
    }
}

TEST(RoutingObserve, HistoryAndControlCycle) {
    auto topo = two_path(10.0);
    topo.horizon = 100;
    topo.control_cycle = 2;
    RoutingEnv env(topo, 1);
    env.step({{1.0, 0.0}, {}});
    auto o = env.observe(0);
    // [demand] [link0 x10] [link1 x10] [avg0 avg1] [split]
    EXPECT_EQ(o[1], 1.0);
    EXPECT_EQ(o[11], 0.0);
    EXPECT_EQ(o[21], 0.0);  // cycle not complete yet
    env.step({{0.0, 1.0}, {}});
    o = env.observe(0);
    EXPECT_EQ(o[1], 0.0);
    EXPECT_EQ(o[2], 1.0);
    EXPECT_EQ(o[11], 1.0);
    EXPECT_EQ(o[21], 0.5);
    EXPECT_EQ(o[22], 0.5);
    EXPECT_EQ(o[23], 0.0);
    EXPECT_EQ(o[24], 1.0);
}

TEST(RoutingObserve, NonAdjacentLinkLoadDoesNotLeak) {
    // Paired runs differing only in router 0's split.
    auto topo = load_routing_topology(kTopologies + "routing_12.json");
    RoutingEnv a(topo, 9), b(topo, 9);
    std::vector<std::vector<double>> act_a, act_b;
    for (std::size_t r = 0; r < topo.routers; ++r) {
        act_a.push_back(a.uniform_split(r));
        act_b.push_back(a.uniform_split(r));
    }
    act_b[0] = {1.0, 0.0, 0.0, 1.0};
    a.step(act_a);
    b.step(act_b);
    std::set<std::size_t> touched;
    for (std::size_t l = 0; l < topo.links.size(); ++l)
        if (a.link_loads()[l] != b.link_loads()[l]) touched.insert(l);
    ASSERT_FALSE(touched.empty());
    for (std::size_t r = 1; r < topo.routers; ++r) {
        bool incident = false;
        for (auto l : topo.direct_links(r)) incident = incident || touched.count(l);
        if (!incident) {
            EXPECT_EQ(a.observe(r), b.observe(r)) << "router " << r;
        }
    }
}

TEST(RoutingTopologyFile, ShippedSmallTopologyMatchesDeclaredAdjacency) {
    auto topo = load_routing_topology(kTopologies + "routing_6.json");
    ASSERT_TRUE(topo.declared_agent_edges.has_value());
    auto declared = AgentGraph::from_edges(topo.routers, *topo.declared_agent_edges);
    EXPECT_EQ(derive_neighborhoods(topo), declared);
    std::size_t paths = 0;
    for (const auto& c : topo.commodities) paths += c.paths.size();
    EXPECT_EQ(topo.routers, 6u);
    EXPECT_EQ(paths, 4u);
}

TEST(RoutingTopologyFile, LineTopologyNeighborhoods) {
    RoutingTopology t;
    t.routers = 3;
    t.links = {{0, 1, 1.0}, {1, 2, 1.0}};
    EXPECT_EQ(derive_neighborhoods(t).neighbors(1), (std::vector<std::size_t>{0, 2}));
}

TEST(RoutingTopologyFile, SchemaViolationsAreLineAddressed) {
    const std::string text = R"({
  "routers": 2,
  "links": [
    {"from": 0, "to": 1, "capacity": 10},
    {"from": 0, "to": 1, "capacity": 0}
  ],
  "commodities": []
})";
    try {
        load_routing_topology(JsonSource::from_text(text, "bad.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("bad.json:5:"), std::string::npos) << e.what();
    }
    const std::string typo = R"({
  "routers": 2,
  "links": [],
  "comodities": []
})";
    try {
        load_routing_topology(JsonSource::from_text(typo, "typo.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("typo.json:4:"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("comodities"), std::string::npos);
    }
    const std::string broken_path = R"({
  "routers": 3,
  "links": [{"from": 0, "to": 1, "capacity": 1}, {"from": 2, "to": 1, "capacity": 1}],
  "commodities": [
    {"src": 0, "dst": 1,
     "paths": [[0], [1]]}
  ]
})";
    try {
        load_routing_topology(JsonSource::from_text(broken_path, "path.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("path.json:6:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_routing_topology(JsonSource::from_text("{\"routers\": 2,\n  \"links\": [", "cut.json")), Error);
}

TEST(RoutingStep, CostScalesLinearly) {
    // Chains of growing length: time per step should grow roughly with size.
    auto build = [](std::size_t n) {
        RoutingTopology t;
        t.routers = n + 1;
        for (std::size_t r = 0; r < n; ++r) {
            t.links.push_back({r, r + 1, 10.0});
            t.links.push_back({r, r + 1, 10.0});
            t.commodities.push_back({r, r + 1, {{2 * r}, {2 * r + 1}}, 5.0});
        }
        return t;
    };
    auto time_per_step = [&](std::size_t n) {
        RoutingEnv env(build(n), 1);
        std::vector<std::vector<double>> act;
        for (std::size_t r = 0; r <= n; ++r) act.push_back(env.uniform_split(r));
        const auto start = std::chrono::steady_clock::now();
        for (int s = 0; s < 200; ++s) env.step(act);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 200.0;
    };
    time_per_step(8);
    const double small = time_per_step(16);
    const double large = time_per_step(64);
    // 4x the size; allow generous slack, but rule out quadratic growth (16x).
    EXPECT_LT(large / small, 10.0);
}

TEST(Wifi, IsolatedApRewardIncreasesWithPower) {
    WifiTopology t;
    t.aps = {{0, 0.0, 0.0}};
    double prev = -1.0;
    for (int p = kMinPower; p <= kMaxPower; ++p) {
        std::vector<int> powers{p};
        const double r = wifi_reward(t, powers);
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(Wifi, TwoInterferingApsAreSymmetric) {
    WifiTopology t;
    t.aps = {{0, 0.0, 0.0}, {1, 0.1, 0.0}};
    t.cutoff_radius = 1.0;
    t.interference_scale = 2.0;
    for (int a = 10; a <= 30; a += 5)
        for (int b = 10; b <= 30; b += 4) {
            std::vector<int> ab{a, b}, ba{b, a};
            EXPECT_DOUBLE_EQ(wifi_reward(t, ab), wifi_reward(t, ba));
        }
}

TEST(Wifi, InterferenceCoefficientsAreSymmetricAndBounded) {
    auto t = load_wifi_topology(kTopologies + "wifi_5.json");
    for (std::size_t a = 0; a < t.aps.size(); ++a)
        for (std::size_t b = 0; b < t.aps.size(); ++b) {
            const double c = t.interference(a, b);
            EXPECT_EQ(c, t.interference(b, a));
            EXPECT_GE(c, 0.0);
            EXPECT_LE(c, 1.0);
            if (t.distance(a, b) >= t.cutoff_radius) {
                EXPECT_EQ(c, 0.0);
            }
        }
}

TEST(Wifi, RewardInUnitIntervalAndPowerRangeChecked) {
    auto t = load_wifi_topology(kTopologies + "wifi_5.json");
    WifiEnv env(t, 2);
    std::mt19937_64 rng(3);
    for (int s = 0; s < 200; ++s) {
        std::vector<std::size_t> a(t.aps.size());
        for (auto& v : a) v = rng() % kPowerLevels;
        auto res = env.step(a);
        EXPECT_GE(res.reward, 0.0);
        EXPECT_LE(res.reward, 1.0);
        EXPECT_EQ(res.observations[0].size(), kWifiObsDim);
    }
    std::vector<int> bad{9, 10, 10, 10, 10};
    EXPECT_THROW(wifi_reward(t, bad), Error);
    std::vector<int> high{31, 10, 10, 10, 10};
    EXPECT_THROW(env.step_powers(high), Error);
}

TEST(Wifi, ApsBeyondCutoffAreIsolated) {
    WifiTopology t;
    t.aps = {{0, 0.0, 0.0}, {1, 5.0, 0.0}, {2, 5.5, 0.0}};
    t.cutoff_radius = 1.0;
    auto g = derive_neighborhoods(t);
    EXPECT_TRUE(g.neighbors(0).empty());
    EXPECT_EQ(g.neighbors(1), (std::vector<std::size_t>{2}));
}

TEST(Wifi, LineFixtureExhaustiveOptimum) {
    auto t = load_wifi_topology(kTopologies + "wifi_line3.json");
    double best = -1.0;
    std::vector<int> arg;
    for (int a = 10; a <= 30; ++a)
        for (int b = 10; b <= 30; ++b)
            for (int c = 10; c <= 30; ++c) {
                std::vector<int> p{a, b, c};
                const double r = wifi_reward(t, p);
                if (r > best) {
                    best = r;
                    arg = p;
                }
            }
    EXPECT_EQ(arg, (std::vector<int>{30, 10, 30}));
    EXPECT_NEAR(best, 2.0 / 3.0, 1e-12);
    std::vector<int> greedy{30, 30, 30};
    EXPECT_LT(wifi_reward(t, greedy), 0.95 * best);
}

TEST(Wifi, SeededLoadsReplay) {
    auto t = load_wifi_topology(kTopologies + "wifi_5.json");
    WifiEnv a(t, 5), b(t, 5);
    std::vector<std::size_t> act(5, 3);
    for (int s = 0; s < 10; ++s) EXPECT_EQ(a.step(act).observations, b.step(act).observations);
}

TEST(Bandit, RewardsOnlyJointZero) {
    CoordinationBandit env;
    std::vector<std::size_t> zz{0, 0}, zo{0, 1}, oo{1, 1};
    EXPECT_EQ(env.step(zz).reward, 1.0);
    EXPECT_EQ(env.step(zo).reward, 0.0);
    EXPECT_EQ(env.step(oo).reward, 0.0);
    EXPECT_TRUE(env.step(zz).terminal);
}
