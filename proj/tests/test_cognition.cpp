#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ncc/cognition.hpp"
#include "ncc/graph.hpp"
#include "ncc/verify/finite_difference.hpp"
#include "ncc/verify/oracles.hpp"

using namespace ncc;
using ad::Tensor;

namespace {

GaussianLatent latent(std::vector<double> mu, std::vector<double> log_sigma) {
    const auto d = mu.size();
    return {Tensor::parameter({d}, std::move(mu)), Tensor::parameter({d}, std::move(log_sigma))};
}

GaussianLatent random_latent(std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mu(-1.5, 1.5), ls(-0.7, 0.7);
    std::vector<double> m(d), s(d);
    for (auto& v : m) v = mu(rng);
    for (auto& v : s) v = ls(rng);
    return latent(m, s);
}

CognitionHeadConfig small_config() {
    CognitionHeadConfig c;
    c.input_dim = 5;
    c.agent_input_dim = 5;
    c.latent_dim = 3;
    c.decoder_hidden = 4;
    c.obs_dim = 2;
    c.hidden_activation = Activation::tanh;
    return c;
}

} // namespace

TEST(Encode, ZeroEncoderGivesUnitGaussian) {
    std::mt19937_64 rng(1);
    CognitionHead head(small_config(), rng);
    std::vector<NamedTensor> params;
    head.collect("head", params);
    zero_values(params);
    auto enc = head.encode(Tensor::constant({2, 5}, std::vector<double>(10, 0.7)));
    for (double v : enc.latent.mu.data()) EXPECT_EQ(v, 0.0);
    for (double v : enc.latent.log_sigma.data()) EXPECT_EQ(std::exp(v), 1.0);
}

TEST(Encode, IdenticalInputsGiveIdenticalLatents) {
    std::mt19937_64 rng(2);
    CognitionHead head(small_config(), rng);
    auto H = Tensor::constant({1, 5}, {0.1, 0.2, -0.3, 0.4, 0.5});
    auto a = head.encode(H), b = head.encode(H);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a.latent.mu.at(k), b.latent.mu.at(k));
        EXPECT_EQ(a.latent.log_sigma.at(k), b.latent.log_sigma.at(k));
        EXPECT_EQ(a.agent.at(k), b.agent.at(k));
    }
}

TEST(Encode, DimensionMismatch) {
    std::mt19937_64 rng(3);
    CognitionHead head(small_config(), rng);
    EXPECT_THROW(head.encode(Tensor::zeros({1, 4})), Error);
}

TEST(Encode, GradientThroughKlMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    CognitionHead head(small_config(), rng);
    std::vector<NamedTensor> params;
    head.collect_encoder("head", params);
    auto H = Tensor::constant({3, 5}, std::vector<double>{0.1, -0.2, 0.3, 0.4, -0.5, 0.2, 0.1, 0.0, -0.3, 0.6,
                                                           -0.4, 0.2, 0.5, 0.1, 0.3});
    auto f = [&] { return kl_to_unit_gaussian(head.encode(H).latent); };
    EXPECT_LT(verify::check_gradients(f, tensors_of(params)).max_rel_error, 1e-4);
}

TEST(Sample, ZeroEpsilonGivesMean) {
    auto l = latent({0.5, -1.0}, {0.3, -0.2});
    auto c = sample(l, Tensor::zeros({2}));
    EXPECT_EQ(c.at(0), 0.5);
    EXPECT_EQ(c.at(1), -1.0);
}

TEST(Sample, LowerClampIsNearDeterministic) {
    auto l = latent({2.0}, {kLogSigmaMin});
    EXPECT_NEAR(sample(l, Tensor::vector({1.0})).at(0), 2.0 + std::exp(-5.0), 1e-15);
}

TEST(Sample, GradientReachesMeanAndLogSigmaOnly) {
    auto l = latent({0.5}, {0.2});
    auto eps = Tensor::parameter({1}, {0.7});
    ad::backward(ad::sum(sample(l, eps)));
    EXPECT_EQ(l.mu.grad()[0], 1.0);
    EXPECT_NEAR(l.log_sigma.grad()[0], std::exp(0.2) * 0.7, 1e-15);
    EXPECT_EQ(eps.grad()[0], 0.0);
}

TEST(Sample, ShapeMismatch) {
    EXPECT_THROW(sample(latent({0.0, 0.0}, {0.0, 0.0}), Tensor::zeros({3})), Error);
}

TEST(Sample, MonteCarloMeanMatchesMu) {
    auto l = latent({0.3, -2.0, 1.0}, {0.0, -1.0, 0.5});
    GaussianStream eps(make_stream(99, StreamId::reparam));
    const int n = 100000;
    std::vector<double> acc(3, 0.0);
    for (int s = 0; s < n; ++s) {
        auto c = sample(l, eps.tensor({3}));
        for (std::size_t k = 0; k < 3; ++k) acc[k] += c.at(k);
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const double sigma = std::exp(l.log_sigma.at(k));
        EXPECT_LT(std::abs(acc[k] / n - l.mu.at(k)), 3.0 * sigma / std::sqrt(double(n)));
    }
}

TEST(Kl, ClosedFormValues) {
    auto p = latent({0.2, -0.1}, {0.3, 0.1});
    EXPECT_EQ(kl_diag_gaussians(p, p).item(), 0.0);
    EXPECT_DOUBLE_EQ(kl_diag_gaussians(latent({1.0}, {0.0}), latent({0.0}, {0.0})).item(), 0.5);
    EXPECT_EQ(kl_to_unit_gaussian(latent({0.0}, {0.0})).item(), 0.0);
    EXPECT_DOUBLE_EQ(kl_to_unit_gaussian(latent({2.0}, {0.0})).item(), 2.0);
}

TEST(Kl, DimensionMismatch) {
    EXPECT_THROW(kl_diag_gaussians(latent({0.0}, {0.0}), latent({0.0, 0.0}, {0.0, 0.0})), Error);
}

TEST(Kl, UnitGaussianIsDefinitionallyConsistent) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_latent(4, rng);
        auto unit = latent(std::vector<double>(4, 0.0), std::vector<double>(4, 0.0));
        EXPECT_EQ(kl_to_unit_gaussian(p).item(), kl_diag_gaussians(p, unit).item());
    }
}

TEST(Kl, MatchesMonteCarloEstimate) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = random_latent(4, rng), q = random_latent(4, rng);
        verify::DiagGaussian pd, qd;
        for (std::size_t k = 0; k < 4; ++k) {
            pd.mu.push_back(p.mu.at(k));
            pd.sigma.push_back(std::exp(p.log_sigma.at(k)));
            qd.mu.push_back(q.mu.at(k));
            qd.sigma.push_back(std::exp(q.log_sigma.at(k)));
        }
        const double closed = kl_diag_gaussians(p, q).item();
        const double mc = verify::monte_carlo_kl(pd, qd, 100000, rng);
        EXPECT_LT(std::abs(closed - mc) / closed, 0.01);
    }
}

TEST(Kl, NonNegativeAndAsymmetric) {
    std::mt19937_64 rng(13);
    int asymmetric = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto p = random_latent(3, rng), q = random_latent(3, rng);
        const double pq = kl_diag_gaussians(p, q).item(), qp = kl_diag_gaussians(q, p).item();
        EXPECT_GE(pq, 0.0);
        EXPECT_GE(qp, 0.0);
        EXPECT_LT(kl_diag_gaussians(p, p).item(), 1e-12);
        if (std::abs(pq - qp) > 1e-9) ++asymmetric;
    }
    EXPECT_GT(asymmetric, 0);
}

TEST(Kl, BatchedRowsAreAveraged) {
    GaussianLatent p{Tensor::constant({2, 1}, {1.0, 2.0}), Tensor::zeros({2, 1})};
    GaussianLatent q{Tensor::zeros({2, 1}), Tensor::zeros({2, 1})};
    EXPECT_DOUBLE_EQ(kl_diag_gaussians(p, q).item(), (0.5 + 2.0) / 2.0);
}

TEST(Kl, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_latent(4, rng), q = random_latent(4, rng);
        auto f = [&] { return kl_diag_gaussians(p, q); };
        EXPECT_LT(verify::check_gradients(f, {p.mu, p.log_sigma, q.mu, q.log_sigma}).max_rel_error, 1e-4);
    }
}

TEST(Reconstruct, ZeroDecoderGivesZeroAndMeanSquareLoss) {
    std::mt19937_64 rng(20);
    CognitionHead head(small_config(), rng);
    std::vector<NamedTensor> params;
    head.collect("head", params);
    zero_values(params);
    auto rec = head.reconstruct(Tensor::constant({1, 3}, {0.4, -0.2, 1.0}));
    for (double v : rec.obs.data()) EXPECT_EQ(v, 0.0);
    auto target = Tensor::constant({1, 2}, {3.0, -1.0});
    EXPECT_DOUBLE_EQ(ad::mse(target, rec.obs).item(), (9.0 + 1.0) / 2.0);
}

TEST(Reconstruct, DimensionMismatch) {
    std::mt19937_64 rng(21);
    CognitionHead head(small_config(), rng);
    EXPECT_THROW(head.reconstruct(Tensor::zeros({1, 4})), Error);
}

TEST(Reconstruct, OverfitsSingleObservation) {
    std::mt19937_64 rng(22);
    auto cfg = small_config();
    cfg.decoder_hidden = 8;
    CognitionHead head(cfg, rng);
    std::vector<NamedTensor> params;
    head.collect("head", params);
    ad::Optimizer opt({ad::OptimizerConfig::Kind::adam, 1e-2}, tensors_of(params));
    auto code = Tensor::constant({1, 3}, {0.5, -0.5, 0.25});
    auto target = Tensor::constant({1, 2}, {0.8, -0.3});
    double loss = 1.0;
    for (int step = 0; step < 2000 && loss >= 1e-3; ++step) {
        auto l = ad::mse(target, head.reconstruct(code).obs);
        loss = l.item();
        ad::backward(l);
        opt.step();
    }
    EXPECT_LT(loss, 1e-3);
}

TEST(Reconstruct, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(23);
    CognitionHead head(small_config(), rng);
    std::vector<NamedTensor> params;
    head.collect("head", params);
    auto code = Tensor::constant({2, 3}, {0.5, -0.5, 0.25, 0.1, 0.2, -0.3});
    auto target = Tensor::constant({2, 2}, {0.8, -0.3, 0.1, 0.0});
    auto f = [&] { return ad::mse(target, head.reconstruct(code).obs); };
    EXPECT_LT(verify::check_gradients(f, tensors_of(params)).max_rel_error, 1e-4);
}

TEST(CdLoss, IdenticalNeighborsLeaveOnlyReconstruction) {
    auto own = latent({0.3, 0.1}, {0.2, -0.1});
    std::vector<GaussianLatent> nbrs{latent({0.3, 0.1}, {0.2, -0.1}), latent({0.3, 0.1}, {0.2, -0.1})};
    auto target = Tensor::constant({1, 2}, {1.0, 2.0});
    auto rec = Tensor::constant({1, 2}, {0.0, 1.0});
    std::vector<ReconstructionTerm> terms{{target, rec}};
    EXPECT_DOUBLE_EQ(cd_loss(terms, own, nbrs, CdMode::neighborhood).item(), 1.0);
    std::vector<ReconstructionTerm> perfect{{target, target}};
    EXPECT_EQ(cd_loss(perfect, own, nbrs, CdMode::neighborhood).item(), 0.0);
}

TEST(CdLoss, TwoNeighborHandComputation) {
    auto own = latent({0.0}, {0.0});
    std::vector<GaussianLatent> nbrs{latent({1.0}, {0.0}), latent({0.0}, {0.0})};
    auto target = Tensor::constant({1, 1}, {0.5});
    std::vector<ReconstructionTerm> terms{{target, target}};
    // KL(N(0,1) ‖ N(1,1)) = 0.5, KL(N(0,1) ‖ N(0,1)) = 0, averaged over two neighbors.
    EXPECT_DOUBLE_EQ(cd_loss(terms, own, nbrs, CdMode::neighborhood).item(), 0.25);
}

TEST(CdLoss, IsolatedAgentFallsBackToUnitPrior) {
    auto own = latent({2.0}, {0.0});
    auto target = Tensor::constant({1, 1}, {0.5});
    std::vector<ReconstructionTerm> terms{{target, target}};
    const auto before = warning_count();
    EXPECT_DOUBLE_EQ(cd_loss(terms, own, {}, CdMode::neighborhood).item(), 2.0);
    EXPECT_GT(warning_count(), before);
    std::vector<GaussianLatent> nbrs{latent({0.0}, {0.0})};
    EXPECT_DOUBLE_EQ(cd_loss(terms, own, nbrs, CdMode::global_unit).item(), 2.0);
}

TEST(CdLoss, StopGradientKeepsNeighborConstant) {
    auto own = latent({0.0}, {0.0});
    std::vector<GaussianLatent> nbrs{latent({1.0}, {0.3})};
    auto target = Tensor::constant({1, 1}, {0.5});
    std::vector<ReconstructionTerm> terms{{target, target}};
    ad::backward(cd_loss(terms, own, nbrs, CdMode::neighborhood, true));
    EXPECT_EQ(nbrs[0].mu.grad()[0], 0.0);
    EXPECT_NE(own.mu.grad()[0], 0.0);
    ad::backward(cd_loss(terms, own, nbrs, CdMode::neighborhood, false));
    EXPECT_NE(nbrs[0].mu.grad()[0], 0.0);
}

TEST(CdLoss, MinimizingDrivesNeighborKlDown) {
    // Three agents on a line with a shared head; fixed, distinct observations.
    std::mt19937_64 rng(30);
    CognitionHeadConfig cfg = small_config();
    cfg.input_dim = cfg.agent_input_dim = 2;
    CognitionHead head(cfg, rng);
    auto g = AgentGraph::line(3);
    std::vector<Tensor> obs{Tensor::constant({1, 2}, {1.0, 0.0}), Tensor::constant({1, 2}, {0.0, 1.0}),
                            Tensor::constant({1, 2}, {-1.0, 0.5})};
    std::vector<NamedTensor> params;
    head.collect("head", params);
    ad::Optimizer opt({ad::OptimizerConfig::Kind::adam, 1e-3}, tensors_of(params));
    auto mean_kl = [&] {
        std::vector<GaussianLatent> lat;
        for (auto& o : obs) lat.push_back(head.encode(o).latent);
        double acc = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j : g.neighbors(i)) {
                acc += kl_diag_gaussians(lat[i], lat[j]).item();
                ++count;
            }
        return acc / count;
    };
    const double initial = mean_kl();
    GaussianStream eps(make_stream(1, StreamId::reparam));
    for (int step = 0; step < 5000; ++step) {
        std::vector<Encoded> enc;
        for (auto& o : obs) enc.push_back(head.encode(o));
        std::vector<Tensor> losses;
        for (std::size_t i = 0; i < 3; ++i) {
            auto c = sample(enc[i].latent, eps.tensor({1, 3}));
            std::vector<ReconstructionTerm> terms{{obs[i], head.reconstruct(c).obs}};
            std::vector<GaussianLatent> nbrs;
            for (std::size_t j : g.neighbors(i)) nbrs.push_back(enc[j].latent);
            losses.push_back(cd_loss(terms, enc[i].latent, nbrs, CdMode::neighborhood));
        }
        ad::backward(ad::add_all(losses));
        opt.step();
    }
    EXPECT_LT(mean_kl(), 0.1 * initial);
}
