#pragma once

// Independent reference computations used by the test suites and the
// `oracle` CLI subcommand. They deliberately avoid the training code paths
// they check: plain loops, explicit densities, exhaustive enumeration.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ncc/graph.hpp"
#include "ncc/nn.hpp"

namespace ncc::verify {

using Matrix = std::vector<std::vector<double>>;

/// act( D^{-1/2} (A + I) D^{-1/2} · Hstack · W ) with dense matrices.
inline Matrix dense_gcn(const AgentGraph& graph, const Matrix& h, const Matrix& w, Activation act) {
    const std::size_t n = graph.size();
    Matrix a_hat(n, std::vector<double>(n, 0.0));
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += (i == j || graph.adjacent(i, j)) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j || graph.adjacent(i, j)) a_hat[i][j] = 1.0 / std::sqrt(deg[i] * deg[j]);
    const std::size_t d_in = w.size(), d_out = w[0].size();
    Matrix out(n, std::vector<double>(d_out, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(d_in, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < d_in; ++k) z[k] += a_hat[i][j] * h[j][k];
        for (std::size_t c = 0; c < d_out; ++c) {
            double v = 0.0;
            for (std::size_t k = 0; k < d_in; ++k) v += z[k] * w[k][c];
            switch (act) {
            case Activation::relu: v = v > 0 ? v : 0; break;
            case Activation::tanh: v = std::tanh(v); break;
            case Activation::identity: break;
            }
            out[i][c] = v;
        }
    }
    return out;
}

struct DiagGaussian {
    std::vector<double> mu;
    std::vector<double> sigma;

    double log_density(const std::vector<double>& x) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            const double z = (x[k] - mu[k]) / sigma[k];
            acc += -0.5 * z * z - std::log(sigma[k]) - 0.5 * std::log(2.0 * std::numbers::pi);
        }
        return acc;
    }
};

/// E_p[log p(x) − log q(x)] estimated from `samples` draws (antithetic pairs).
inline double monte_carlo_kl(const DiagGaussian& p, const DiagGaussian& q, std::size_t samples, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t d = p.mu.size();
    std::vector<double> eps(d), x(d);
    double acc = 0.0;
    const std::size_t pairs = samples / 2;
    for (std::size_t s = 0; s < pairs; ++s) {
        for (double& e : eps) e = normal(rng);
        for (double sign : {1.0, -1.0}) {
            for (std::size_t k = 0; k < d; ++k) x[k] = p.mu[k] + sign * p.sigma[k] * eps[k];
            acc += p.log_density(x) - q.log_density(x);
        }
    }
    return acc / static_cast<double>(2 * pairs);
}

/// max over every joint action of Σ_i q[i][a_i], by enumeration.
inline double exhaustive_joint_max(const Matrix& q) {
    const std::size_t n = q.size();
    std::vector<std::size_t> joint(n, 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += q[i][joint[i]];
        best = std::max(best, total);
        std::size_t i = 0;
        while (i < n && ++joint[i] == q[i].size()) joint[i++] = 0;
        if (i == n) break;
    }
    return best;
}

} // namespace ncc::verify
