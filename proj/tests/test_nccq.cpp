#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ncc/envs/bandit.hpp"
#include "ncc/nccq.hpp"
#include "ncc/verify/finite_difference.hpp"
#include "ncc/verify/oracles.hpp"

using namespace ncc;
using namespace ncc::q;

namespace {

NccQConfig small_config(Variant v = Variant::ncc) {
    auto c = NccQConfig::for_variant(v, 0.1);
    c.hidden_dim = 6;
    c.latent_dim = 3;
    c.decoder_hidden = 5;
    c.q_hidden = 5;
    c.batch_size = 8;
    c.replay_capacity = 64;
    c.target_sync_interval = 5;
    c.gamma = 0.9;
    return c;
}

const std::vector<AgentSpec> kAgents{{3, 3}, {4, 2}, {2, 4}, {3, 2}};

Transition random_transition(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Transition t;
    for (const auto& a : kAgents) {
        std::vector<double> o(a.obs_dim), o2(a.obs_dim);
        for (auto& v : o) v = n(rng);
        for (auto& v : o2) v = n(rng);
        t.observations.push_back(o);
        t.next_observations.push_back(o2);
        t.actions.push_back(rng() % a.n_actions);
    }
    t.reward = n(rng);
    t.terminal = rng() % 4 == 0;
    return t;
}

Batch random_batch(std::size_t size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Transition> rows;
    for (std::size_t k = 0; k < size; ++k) rows.push_back(random_transition(rng));
    std::vector<const Transition*> ptrs;
    for (const auto& r : rows) ptrs.push_back(&r);
    return make_batch(ptrs, kAgents);
}

// 0 - 1 - 2   3 (isolated)
AgentGraph path_graph() {
    const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}};
    return AgentGraph::from_edges(4, edges);
}

std::vector<ad::Tensor> perturbed(const std::vector<ad::Tensor>& obs, std::size_t agent) {
    auto out = obs;
    std::vector<double> v(obs[agent].data().begin(), obs[agent].data().end());
    for (auto& x : v) x += 0.37;
    out[agent] = ad::Tensor::constant(obs[agent].shape(), v);
    return out;
}

bool same_values(const ad::Tensor& a, const ad::Tensor& b) {
    return std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

std::vector<std::vector<double>> snapshot(const std::vector<NamedTensor>& params) {
    std::vector<std::vector<double>> out;
    for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

} // namespace

TEST(QForward, ZeroParametersGiveZeroValues) {
    auto rng = make_stream(1, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto params = net.parameters();
    zero_values(params);
    auto batch = random_batch(5, 2);
    GaussianStream eps(make_stream(1, StreamId::reparam));
    for (bool eval : {true, false}) {
        auto fwd = q_forward(net, path_graph(), batch.obs, eval, &eps);
        for (std::size_t i = 0; i < kAgents.size(); ++i) {
            ASSERT_EQ(fwd.q[i].shape(), (ad::Shape{5, kAgents[i].n_actions}));
            for (double v : fwd.q[i].data()) EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(QForward, ObservationWidthMismatchIsStructured) {
    auto rng = make_stream(1, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto batch = random_batch(2, 2);
    batch.obs[1] = ad::Tensor::zeros({2, 7});
    try {
        q_forward(net, path_graph(), batch.obs, true);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
    }
    batch.obs.pop_back();
    EXPECT_THROW(q_forward(net, path_graph(), batch.obs, true), Error);
}

TEST(QForward, IndependentVariantsIgnoreOtherAgents) {
    for (auto v : {Variant::vdn, Variant::idqn}) {
        auto rng = make_stream(3, StreamId::init);
        NccQNet net(small_config(v), kAgents, rng);
        auto batch = random_batch(4, 5);
        auto base = q_forward(net, path_graph(), batch.obs, true);
        auto moved = q_forward(net, path_graph(), perturbed(batch.obs, 1), true);
        for (std::size_t i : {0u, 2u, 3u}) EXPECT_TRUE(same_values(base.q[i], moved.q[i])) << i;
        EXPECT_FALSE(same_values(base.q[1], moved.q[1]));
    }
}

TEST(QForward, GraphVariantSeesOnlyClosedNeighborhood) {
    auto rng = make_stream(3, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto batch = random_batch(4, 5);
    auto base = q_forward(net, path_graph(), batch.obs, true);
    auto moved = q_forward(net, path_graph(), perturbed(batch.obs, 0), true);
    EXPECT_FALSE(same_values(base.q[0], moved.q[0]));
    EXPECT_FALSE(same_values(base.q[1], moved.q[1]));
    EXPECT_TRUE(same_values(base.q[2], moved.q[2]));
    EXPECT_TRUE(same_values(base.q[3], moved.q[3]));
}

TEST(QForward, EvalModeIsDeterministicAndUsesLatentMean) {
    auto rng = make_stream(4, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto batch = random_batch(3, 6);
    auto a = q_forward(net, path_graph(), batch.obs, true);
    auto b = q_forward(net, path_graph(), batch.obs, true);
    for (std::size_t i = 0; i < kAgents.size(); ++i) {
        EXPECT_TRUE(same_values(a.q[i], b.q[i]));
        EXPECT_FALSE(a.reconstructions[i].has_value());
    }
    GaussianStream eps(make_stream(4, StreamId::reparam));
    auto c = q_forward(net, path_graph(), batch.obs, false, &eps);
    EXPECT_FALSE(same_values(a.q[0], c.q[0]));
    EXPECT_THROW(q_forward(net, path_graph(), batch.obs, false), Error);
}

TEST(Mix, Examples) {
    std::vector<double> three{1.0, 2.0, 3.0};
    EXPECT_EQ(mix(three), 6.0);
    std::vector<double> one{-2.5};
    EXPECT_EQ(mix(one), -2.5);
}

TEST(Mix, TensorMixIsPermutationInvariantExactly) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1e3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ad::Tensor> q;
        for (int i = 0; i < 5; ++i) q.push_back(ad::Tensor::vector({n(rng), n(rng), n(rng)}));
        auto base = mix(q);
        std::vector<ad::Tensor> shuffled = q;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_TRUE(same_values(base, mix(shuffled)));
    }
}

TEST(Mix, UniformCreditGradient) {
    std::vector<ad::Tensor> q;
    for (int i = 0; i < 4; ++i) q.push_back(ad::Tensor::parameter({3}, {0.1 * i, -0.2, 0.3}));
    ad::backward(ad::sum(mix(q)));
    for (const auto& t : q)
        for (double g : t.grad()) EXPECT_EQ(g, 1.0);
}

TEST(TdTarget, DecomposedMaxEqualsExhaustiveJointMax) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t agents = 1 + rng() % 4;
        verify::Matrix q(agents);
        for (auto& row : q) {
            row.resize(1 + rng() % 5);
            for (auto& v : row) v = n(rng);
        }
        ASSERT_EQ(decomposed_max(q), verify::exhaustive_joint_max(q));
    }
}

TEST(TdTarget, ThreeAgentsFourActionsAgainstEnumeration) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        verify::Matrix q(3, std::vector<double>(4));
        for (auto& row : q)
            for (auto& v : row) v = n(rng);
        double best = -1e300;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c) best = std::max(best, q[0][a] + q[1][b] + q[2][c]);
        EXPECT_EQ(decomposed_max(q), best);
    }
}

TEST(TdTarget, NetworkTargetMatchesEnumeratedMax) {
    auto rng = make_stream(5, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto batch = random_batch(6, 13);
    const double gamma = 0.7;
    auto y = td_target(net, path_graph(), batch.reward, batch.next_obs, batch.terminal, gamma);
    auto fwd = q_forward(net, path_graph(), batch.next_obs, true);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        verify::Matrix q;
        for (const auto& t : fwd.q) {
            const std::size_t w = t.dim(1);
            q.emplace_back(t.data().begin() + r * w, t.data().begin() + (r + 1) * w);
        }
        const double expect = batch.terminal[r] > 0 ? batch.reward[r]
                                                    : batch.reward[r] + gamma * verify::exhaustive_joint_max(q);
        EXPECT_EQ(y[r], expect);
    }
}

TEST(TdTarget, ZeroDiscountAndTerminalGiveReward) {
    auto rng = make_stream(5, StreamId::init);
    NccQNet net(small_config(), kAgents, rng);
    auto batch = random_batch(6, 14);
    auto y0 = td_target(net, path_graph(), batch.reward, batch.next_obs, batch.terminal, 0.0);
    EXPECT_EQ(y0, batch.reward);
    std::vector<double> all_terminal(batch.size(), 1.0);
    auto yt = td_target(net, path_graph(), batch.reward, batch.next_obs, all_terminal, 0.99);
    EXPECT_EQ(yt, batch.reward);
    EXPECT_THROW(td_target(net, path_graph(), batch.reward, batch.next_obs, batch.terminal, 1.5), Error);
}

TEST(TotalLoss, ZeroAlphaIsTdOnly) {
    auto config = small_config(Variant::graph);
    ASSERT_EQ(config.alpha, 0.0);
    auto rng = make_stream(6, StreamId::init);
    NccQNet net(config, kAgents, rng);
    auto batch = random_batch(8, 15);
    GaussianStream eps(make_stream(6, StreamId::reparam));
    auto parts = total_loss(net, net, path_graph(), batch, config, eps);
    EXPECT_EQ(parts.total.item(), parts.td);
    EXPECT_EQ(parts.cd, 0.0);
}

TEST(TotalLoss, PerfectTargetsAndZeroDissonanceGiveZero) {
    auto config = small_config();
    auto rng = make_stream(6, StreamId::init);
    NccQNet net(config, kAgents, rng);
    auto params = net.parameters();
    zero_values(params);
    auto batch = random_batch(8, 15);
    for (auto& o : batch.obs) o = ad::Tensor::zeros(o.shape());
    std::fill(batch.reward.begin(), batch.reward.end(), 0.0);
    GaussianStream eps(make_stream(6, StreamId::reparam));
    auto parts = total_loss(net, net, path_graph(), batch, config, eps);
    EXPECT_EQ(parts.total.item(), 0.0);
}

TEST(TotalLoss, CdTermIsAlphaWeightedSumOfAgentLosses) {
    auto config = small_config();
    config.alpha = 0.25;
    auto rng = make_stream(7, StreamId::init);
    NccQNet net(config, kAgents, rng);
    auto batch = random_batch(8, 16);
    GaussianStream eps(make_stream(7, StreamId::reparam));
    set_warnings_quiet(true);
    auto parts = total_loss(net, net, path_graph(), batch, config, eps);
    set_warnings_quiet(false);
    EXPECT_GT(parts.cd, 0.0);
    EXPECT_NEAR(parts.total.item(), parts.td + 0.25 * parts.cd, 1e-12);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
    for (auto v : {Variant::ncc, Variant::gcc, Variant::vdn, Variant::idqn}) {
        auto config = small_config(v);
        auto rng = make_stream(9, StreamId::init);
        NccQNet net(config, kAgents, rng);
        auto target = net.clone();
        auto batch = random_batch(6, 17);
        const GaussianStream eps0(make_stream(9, StreamId::reparam));
        set_warnings_quiet(true);
        auto loss_fn = [&] {
            GaussianStream eps = eps0;
            return total_loss(net, target, path_graph(), batch, config, eps).total;
        };
        std::mt19937_64 pick(21);
        auto res = verify::check_gradients(loss_fn, tensors_of(net.parameters()), 1e-6, 6, &pick);
        set_warnings_quiet(false);
        EXPECT_LT(res.max_rel_error, 1e-4) << to_string(v);
        EXPECT_GT(res.coordinates, 20u);
    }
}

TEST(Act, GreedyWithoutExplorationAndShiftInvariant) {
    NccQLearner learner(small_config(), path_graph(), kAgents, 3);
    std::mt19937_64 rng(2);
    auto t = random_transition(rng);
    auto q = learner.q_values(t.observations);
    auto a = learner.act(t.observations, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
        EXPECT_EQ(a[i], argmax(q[i]));
        auto shifted = q[i];
        for (auto& v : shifted) v += 123.25;
        EXPECT_EQ(argmax(shifted), a[i]);
    }
    EXPECT_THROW(learner.act(t.observations, 1.5), Error);
}

TEST(Act, FullExplorationIsUniform) {
    NccQLearner learner(small_config(), path_graph(), kAgents, 4);
    std::mt19937_64 rng(2);
    auto t = random_transition(rng);
    const int draws = 10000;
    std::vector<std::vector<int>> counts;
    for (const auto& a : kAgents) counts.emplace_back(a.n_actions, 0);
    for (int d = 0; d < draws; ++d) {
        auto a = learner.act(t.observations, 1.0);
        for (std::size_t i = 0; i < a.size(); ++i) ++counts[i][a[i]];
    }
    for (std::size_t i = 0; i < kAgents.size(); ++i) {
        const double p = 1.0 / static_cast<double>(kAgents[i].n_actions);
        const double sigma = std::sqrt(draws * p * (1 - p));
        for (int c : counts[i]) EXPECT_LT(std::abs(c - draws * p), 3 * sigma);
    }
}

TEST(TrainStep, UnderfilledBufferIsNoOpWithWarning) {
    NccQLearner learner(small_config(), path_graph(), kAgents, 5);
    const auto before = snapshot(learner.parameters());
    const auto warnings = warning_count();
    set_warnings_quiet(true);
    EXPECT_FALSE(learner.train_step().has_value());
    set_warnings_quiet(false);
    EXPECT_EQ(warning_count(), warnings + 1);
    EXPECT_EQ(snapshot(learner.parameters()), before);
}

TEST(TrainStep, SeededRunsAreBitIdentical) {
    auto run = [] {
        NccQLearner learner(small_config(), path_graph(), kAgents, 6);
        std::mt19937_64 rng(7);
        for (int k = 0; k < 20; ++k) learner.store(random_transition(rng));
        std::vector<double> trace;
        set_warnings_quiet(true);
        for (int s = 0; s < 12; ++s) {
            auto m = learner.train_step();
            trace.push_back(m->loss);
            trace.push_back(m->neighbor_kl);
        }
        set_warnings_quiet(false);
        return std::make_pair(trace, snapshot(learner.parameters()));
    };
    EXPECT_EQ(run(), run());
}

TEST(TrainStep, ZeroLearningRateKeepsParametersAndEmitsMetrics) {
    auto config = small_config();
    config.optimizer.lr = 0.0;
    NccQLearner learner(config, path_graph(), kAgents, 6);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) learner.store(random_transition(rng));
    const auto before = snapshot(learner.parameters());
    set_warnings_quiet(true);
    auto m = learner.train_step();
    set_warnings_quiet(false);
    ASSERT_TRUE(m.has_value());
    EXPECT_TRUE(std::isfinite(m->td));
    EXPECT_GT(m->cd, 0.0);
    EXPECT_EQ(m->cognition.size(), kAgents.size());
    EXPECT_EQ(snapshot(learner.parameters()), before);
}

TEST(TrainStep, NonFiniteLossRaisesNumericError) {
    NccQLearner learner(small_config(), path_graph(), kAgents, 6);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        auto t = random_transition(rng);
        t.reward = std::nan("");
        learner.store(t);
    }
    try {
        set_warnings_quiet(true);
        learner.train_step();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
    set_warnings_quiet(false);
}

TEST(SyncTarget, InitialTargetEqualsInitializationAndSyncCopies) {
    auto config = small_config();
    config.target_sync_interval = 0;
    NccQLearner learner(config, path_graph(), kAgents, 8);
    EXPECT_EQ(snapshot(learner.target_parameters()), snapshot(learner.parameters()));
    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) learner.store(random_transition(rng));
    set_warnings_quiet(true);
    for (int s = 0; s < 3; ++s) learner.train_step();
    set_warnings_quiet(false);
    auto batch = random_batch(8, 30);
    auto y_online = td_target(learner.net(), path_graph(), batch.reward, batch.next_obs, batch.terminal, 0.9);
    auto y_target = td_target(learner.target(), path_graph(), batch.reward, batch.next_obs, batch.terminal, 0.9);
    EXPECT_NE(y_online, y_target);
    learner.sync_target();
    y_target = td_target(learner.target(), path_graph(), batch.reward, batch.next_obs, batch.terminal, 0.9);
    EXPECT_EQ(y_online, y_target);
}

TEST(SyncTarget, TargetFrozenWithinWindowAndMovesAtSync) {
    auto config = small_config();
    config.target_sync_interval = 4;
    config.optimizer.lr = 1e-2;
    NccQLearner learner(config, path_graph(), kAgents, 8);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) learner.store(random_transition(rng));
    auto batch = random_batch(8, 31);
    auto y = [&] {
        return td_target(learner.target(), path_graph(), batch.reward, batch.next_obs, batch.terminal, 0.9);
    };
    std::vector<std::vector<double>> seen{y()};
    set_warnings_quiet(true);
    for (int s = 1; s <= 12; ++s) {
        learner.train_step();
        seen.push_back(y());
        if (s % 4 == 0) {
            EXPECT_NE(seen[s], seen[s - 1]) << s;
        } else {
            EXPECT_EQ(seen[s], seen[s - 1]) << s;
        }
    }
    set_warnings_quiet(false);
}

TEST(Ablation, BypassedNccReproducesVdnAndIdqn) {
    for (auto [bypass, reference] : {std::pair{Modules{false, false, true}, Variant::vdn},
                                     std::pair{Modules{false, false, false}, Variant::idqn}}) {
        auto ncc_config = small_config(Variant::ncc);
        ncc_config.alpha = 0.0;
        ncc_config.modules = bypass;
        auto run = [](const NccQConfig& config) {
            NccQLearner learner(config, path_graph(), kAgents, 10);
            std::mt19937_64 rng(11);
            std::vector<double> trace;
            for (int k = 0; k < 40; ++k) {
                auto t = random_transition(rng);
                t.actions = learner.act(t.observations, 0.3);
                learner.store(t);
                if (auto m = learner.train_step()) trace.push_back(m->loss);
            }
            return std::make_pair(trace, snapshot(learner.parameters()));
        };
        set_warnings_quiet(true);
        auto a = run(ncc_config);
        auto b = run(small_config(reference));
        set_warnings_quiet(false);
        EXPECT_FALSE(a.first.empty());
        EXPECT_EQ(a, b) << to_string(reference);
    }
}

TEST(Ablation, ShareAllRequiresHomogeneousAgents) {
    auto config = small_config();
    config.share_all = true;
    auto rng = make_stream(1, StreamId::init);
    EXPECT_THROW(NccQNet(config, kAgents, rng), Error);
    std::vector<AgentSpec> same(3, AgentSpec{4, 3});
    NccQNet net(config, same, rng);
    EXPECT_LT(net.parameters().size(), NccQNet(small_config(), same, rng).parameters().size());
}
