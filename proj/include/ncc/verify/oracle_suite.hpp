#pragma once

// Randomized oracle comparisons: closed-form KL against Monte Carlo, GCN
// against the dense normalized adjacency, and the decomposed max against
// exhaustive joint-action enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ncc/cognition.hpp"
#include "ncc/graph.hpp"
#include "ncc/nccq.hpp"
#include "ncc/verify/oracles.hpp"

namespace ncc::verify {

struct OracleResult {
    std::string name;
    bool passed = false;
    std::size_t trials = 0;
    double worst = 0.0;  // worst observed error in the check's own metric
    std::string detail;
};

namespace oracle_detail {

inline AgentGraph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
    AgentGraph g(n);
    std::bernoulli_distribution edge(p);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (edge(rng)) g.connect(a, b);
    return g;
}

inline std::vector<ad::Tensor> random_features(std::size_t n, std::size_t batch, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    std::vector<ad::Tensor> h;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(batch * d);
        for (double& x : v) x = dist(rng);
        h.push_back(ad::Tensor::constant({batch, d}, std::move(v)));
    }
    return h;
}

inline GaussianLatent random_latent(std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mu(-1.5, 1.5), ls(-0.7, 0.7);
    std::vector<double> m(d), s(d);
    for (auto& v : m) v = mu(rng);
    for (auto& v : s) v = ls(rng);
    return {ad::Tensor::constant({d}, m), ad::Tensor::constant({d}, s)};
}

inline DiagGaussian to_diag(const GaussianLatent& p) {
    DiagGaussian out;
    for (std::size_t k = 0; k < p.dim(); ++k) {
        out.mu.push_back(p.mu.at(k));
        out.sigma.push_back(std::exp(p.log_sigma.at(k)));
    }
    return out;
}

} // namespace oracle_detail

/// Closed-form KL vs a Monte Carlo estimate on `pairs` random latent pairs of
/// width `dim` (the default latent width).
inline OracleResult kl_monte_carlo_oracle(std::uint64_t seed, std::size_t pairs = 50, std::size_t samples = 100000,
                                          std::size_t dim = q::NccQConfig{}.latent_dim) {
    std::mt19937_64 rng(seed);
    OracleResult r{"kl_monte_carlo", true, 0, 0.0, ""};
    for (std::size_t t = 0; t < pairs; ++t) {
        const std::size_t d = dim;
        auto p = oracle_detail::random_latent(d, rng), q = oracle_detail::random_latent(d, rng);
        const double closed = kl_diag_gaussians(p, q).item();
        const double mc = monte_carlo_kl(oracle_detail::to_diag(p), oracle_detail::to_diag(q), samples, rng);
        const double rel = std::abs(closed - mc) / closed;
        r.worst = std::max(r.worst, rel);
        ++r.trials;
    }
    r.passed = r.worst < 0.01;
    r.detail = "max relative error " + std::to_string(r.worst) + " (limit 0.01)";
    return r;
}

/// KL(p ‖ p) on random latents, batched and unbatched.
inline OracleResult kl_self_oracle(std::uint64_t seed, std::size_t trials = 1000) {
    std::mt19937_64 rng(seed);
    OracleResult r{"kl_self", true, 0, 0.0, ""};
    std::uniform_real_distribution<double> mu(-10, 10), ls(kLogSigmaMin, kLogSigmaMax);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = 1 + rng() % 3, d = 1 + rng() % 8;
        std::vector<double> m(b * d), s(b * d);
        for (auto& v : m) v = mu(rng);
        for (auto& v : s) v = ls(rng);
        GaussianLatent p{ad::Tensor::constant({b, d}, m), ad::Tensor::constant({b, d}, s)};
        r.worst = std::max(r.worst, std::abs(kl_diag_gaussians(p, p).item()));
        ++r.trials;
    }
    r.passed = r.worst < 1e-12;
    r.detail = "max |KL(p||p)| " + std::to_string(r.worst) + " (limit 1e-12)";
    return r;
}

/// gcn_forward vs the dense computation on random graphs with at most 8 nodes.
inline OracleResult gcn_dense_oracle(std::uint64_t seed, std::size_t trials = 200) {
    std::mt19937_64 rng(seed);
    OracleResult r{"gcn_dense", true, 0, 0.0, ""};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 8, d_in = 1 + rng() % 5, d_out = 1 + rng() % 4;
        auto g = oracle_detail::random_graph(n, 0.4, rng);
        GcnLayer layer(d_in, d_out, rng, t % 3 == 0 ? Activation::relu : t % 3 == 1 ? Activation::tanh : Activation::identity);
        auto h = oracle_detail::random_features(n, 1, d_in, rng);
        auto out = gcn_forward(layer, g, h);
        Matrix hm(n), wm(d_in, std::vector<double>(d_out));
        for (std::size_t i = 0; i < n; ++i) hm[i].assign(h[i].data().begin(), h[i].data().end());
        for (std::size_t k = 0; k < d_in; ++k)
            for (std::size_t c = 0; c < d_out; ++c) wm[k][c] = layer.weight.at(k * d_out + c);
        auto ref = dense_gcn(g, hm, wm, layer.activation);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d_out; ++c) r.worst = std::max(r.worst, std::abs(out[i].at(c) - ref[i][c]));
        ++r.trials;
    }
    r.passed = r.worst <= 1e-12;
    r.detail = "max abs deviation " + std::to_string(r.worst) + " (limit 1e-12)";
    return r;
}

/// Relabeling agents permutes outputs with exactly equal values.
inline OracleResult gcn_permutation_oracle(std::uint64_t seed, std::size_t trials = 200) {
    std::mt19937_64 rng(seed);
    OracleResult r{"gcn_permutation_equivariance", true, 0, 0.0, ""};
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 8;
        auto g = oracle_detail::random_graph(n, 0.5, rng);
        GcnLayer layer(3, 3, rng);
        auto h = oracle_detail::random_features(n, 2, 3, rng);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        AgentGraph pg(n);
        for (auto [a, b] : g.edges()) pg.connect(perm[a], perm[b]);
        std::vector<ad::Tensor> ph(n);
        for (std::size_t i = 0; i < n; ++i) ph[perm[i]] = h[i];
        auto out = gcn_forward(layer, g, h);
        auto pout = gcn_forward(layer, pg, ph);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < out[i].size(); ++k)
                if (out[i].at(k) != pout[perm[i]].at(k)) ++mismatches;
        ++r.trials;
    }
    r.worst = static_cast<double>(mismatches);
    r.passed = mismatches == 0;
    r.detail = std::to_string(mismatches) + " inexact components";
    return r;
}

/// Perturbing a non-neighbor leaves an agent's output bit-identical.
inline OracleResult gcn_locality_oracle(std::uint64_t seed, std::size_t trials = 200) {
    std::mt19937_64 rng(seed);
    OracleResult r{"gcn_locality", true, 0, 0.0, ""};
    std::size_t violations = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 8;
        auto g = oracle_detail::random_graph(n, 0.3, rng);
        GcnLayer layer(3, 2, rng, Activation::tanh);
        auto h = oracle_detail::random_features(n, 1, 3, rng);
        auto base = gcn_forward(layer, g, h);
        for (std::size_t k = 0; k < n; ++k) {
            auto perturbed = h;
            perturbed[k] = ad::add_scalar(h[k], 10.0);
            auto out = gcn_forward(layer, g, perturbed);
            for (std::size_t i = 0; i < n; ++i) {
                if (i == k || g.adjacent(i, k)) continue;
                for (std::size_t c = 0; c < 2; ++c)
                    if (out[i].at(c) != base[i].at(c)) ++violations;
            }
        }
        ++r.trials;
    }
    r.worst = static_cast<double>(violations);
    r.passed = violations == 0;
    r.detail = std::to_string(violations) + " outputs changed outside the closed neighborhood";
    return r;
}

/// Per-agent max vs exhaustive joint max for at most 4 agents x 5 actions; exact equality.
inline OracleResult joint_max_oracle(std::uint64_t seed, std::size_t trials = 1000) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    OracleResult r{"decomposed_joint_max", true, 0, 0.0, ""};
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Matrix q(1 + rng() % 4);
        for (auto& row : q) {
            row.resize(1 + rng() % 5);
            for (auto& v : row) v = normal(rng);
        }
        const double decomposed = q::decomposed_max(q);
        const double exhaustive = exhaustive_joint_max(q);
        if (decomposed != exhaustive) ++mismatches;
        r.worst = std::max(r.worst, std::abs(decomposed - exhaustive));
        ++r.trials;
    }
    r.passed = mismatches == 0;
    r.detail = std::to_string(mismatches) + " of " + std::to_string(trials) + " trials differ";
    return r;
}

inline std::vector<OracleResult> run_oracle_suite(std::uint64_t seed = 0) {
    return {kl_monte_carlo_oracle(seed + 1), kl_self_oracle(seed + 2),      gcn_dense_oracle(seed + 3),
            gcn_permutation_oracle(seed + 4), gcn_locality_oracle(seed + 5), joint_max_oracle(seed + 6)};
}

} // namespace ncc::verify
