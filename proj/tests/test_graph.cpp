#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "ncc/graph.hpp"
#include "ncc/verify/finite_difference.hpp"
#include "ncc/verify/oracles.hpp"

using namespace ncc;
using ad::Tensor;

namespace {

AgentGraph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
    AgentGraph g(n);
    std::bernoulli_distribution edge(p);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (edge(rng)) g.connect(a, b);
    return g;
}

std::vector<Tensor> random_features(std::size_t n, std::size_t batch, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    std::vector<Tensor> h;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(batch * d);
        for (double& x : v) x = dist(rng);
        h.push_back(Tensor::constant({batch, d}, std::move(v)));
    }
    return h;
}

Tensor identity(std::size_t d) {
    std::vector<double> v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
    return Tensor::parameter({d, d}, std::move(v));
}

} // namespace

TEST(AgentGraph, Neighbors) {
    auto line = AgentGraph::line(3);
    EXPECT_EQ(line.neighbors(1), (std::vector<std::size_t>{0, 2}));
    AgentGraph isolated(2);
    EXPECT_TRUE(isolated.neighbors(0).empty());
    auto complete = AgentGraph::complete(3);
    EXPECT_EQ(neighbors(complete, 0), (std::vector<std::size_t>{1, 2}));
}

TEST(AgentGraph, SymmetricWithoutSelfEdges) {
    AgentGraph g(3);
    g.connect(0, 2);
    g.connect(1, 1);
    EXPECT_TRUE(g.adjacent(2, 0));
    EXPECT_FALSE(g.adjacent(1, 1));
    EXPECT_EQ(g.closed_neighborhood(2), (std::vector<std::size_t>{0, 2}));
}

TEST(AgentGraph, IndexOutOfRange) {
    auto g = AgentGraph::line(3);
    try {
        g.neighbors(3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(Gcn, TwoAdjacentAgentsWithEqualFeaturesAreAFixedPoint) {
    auto g = AgentGraph::complete(2);
    GcnLayer layer(identity(3), Activation::identity);
    auto v = Tensor::vector({0.3, -1.2, 2.0});
    std::vector<Tensor> h{v, v};
    auto out = gcn_forward(layer, g, h);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(out[i].at(k), v.at(k));
}

TEST(Gcn, IsolatedAgentKeepsOwnFeatures) {
    AgentGraph g(2);
    GcnLayer layer(identity(2), Activation::identity);
    std::vector<Tensor> h{Tensor::vector({1.5, -2.5}), Tensor::vector({7.0, 8.0})};
    auto out = gcn_forward(layer, g, h);
    EXPECT_EQ(out[0].at(0), 1.5);
    EXPECT_EQ(out[0].at(1), -2.5);
}

TEST(Gcn, FeatureDimensionMismatch) {
    auto g = AgentGraph::line(2);
    GcnLayer layer(identity(3), Activation::relu);
    std::vector<Tensor> h{Tensor::vector({1.0, 2.0}), Tensor::vector({1.0, 2.0})};
    EXPECT_THROW(gcn_forward(layer, g, h), Error);
}

TEST(Gcn, MatchesDenseNormalizedAdjacencyOracle) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 8;
        auto g = random_graph(n, 0.4, rng);
        GcnLayer layer(4, 3, rng, trial % 2 ? Activation::relu : Activation::tanh);
        auto h = random_features(n, 1, 4, rng);
        auto out = gcn_forward(layer, g, h);
        verify::Matrix hm(n), wm(4, std::vector<double>(3));
        for (std::size_t i = 0; i < n; ++i) hm[i].assign(h[i].data().begin(), h[i].data().end());
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t c = 0; c < 3; ++c) wm[k][c] = layer.weight.at(k * 3 + c);
        auto ref = verify::dense_gcn(g, hm, wm, layer.activation);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out[i].at(c), ref[i][c], 1e-12);
    }
}

TEST(Gcn, PermutationEquivarianceIsExact) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        auto g = random_graph(n, 0.5, rng);
        GcnLayer layer(3, 3, rng);
        auto h = random_features(n, 2, 3, rng);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        // agent i is relabeled perm[i]
        AgentGraph pg(n);
        for (auto [a, b] : g.edges()) pg.connect(perm[a], perm[b]);
        std::vector<Tensor> ph(n);
        for (std::size_t i = 0; i < n; ++i) ph[perm[i]] = h[i];
        auto out = gcn_forward(layer, g, h);
        auto pout = gcn_forward(layer, pg, ph);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < out[i].size(); ++k) EXPECT_EQ(out[i].at(k), pout[perm[i]].at(k));
    }
}

TEST(Gcn, LocalityIsExact) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng() % 6;
        auto g = random_graph(n, 0.3, rng);
        GcnLayer layer(3, 2, rng);
        auto h = random_features(n, 1, 3, rng);
        auto base = gcn_forward(layer, g, h);
        for (std::size_t k = 0; k < n; ++k) {
            auto perturbed = h;
            perturbed[k] = ad::add_scalar(h[k], 10.0);
            auto out = gcn_forward(layer, g, perturbed);
            for (std::size_t i = 0; i < n; ++i) {
                if (i == k || g.adjacent(i, k)) continue;
                for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(out[i].at(c), base[i].at(c));
            }
        }
    }
}

TEST(Gcn, GradientThroughWeightAndFeatures) {
    std::mt19937_64 rng(8);
    auto g = AgentGraph::line(4);
    GcnLayer layer(3, 3, rng, Activation::tanh);
    std::vector<Tensor> h;
    for (auto& t : random_features(4, 2, 3, rng)) h.push_back(t.clone().detach());
    std::vector<Tensor> hp;
    for (auto& t : h) hp.push_back(Tensor::parameter(t.shape(), {t.data().begin(), t.data().end()}));
    auto f = [&] {
        auto out = gcn_forward(layer, g, hp);
        return ad::sum(ad::square(ad::add_all(out)));
    };
    std::vector<Tensor> params{layer.weight};
    params.insert(params.end(), hp.begin(), hp.end());
    EXPECT_LT(verify::check_gradients(f, params).max_rel_error, 1e-5);
}
