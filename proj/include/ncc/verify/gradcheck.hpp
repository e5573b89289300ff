#pragma once

// Finite-difference suite over every differentiable primitive and every
// composite training loss. Each case draws fresh random shapes and values per
// instance. Shared by the `gradcheck` subcommand and the acceptance binary.

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ncc/cognition.hpp"
#include "ncc/graph.hpp"
#include "ncc/nccac.hpp"
#include "ncc/nccq.hpp"
#include "ncc/verify/finite_difference.hpp"

namespace ncc::verify {

struct GradCheckCase {
    std::string name;
    std::size_t instances = 0;
    std::size_t coordinates = 0;
    double max_rel_error = 0.0;
    double seconds = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double seconds = 0.0;
    double tolerance = 1e-4;

    bool passed() const {
        for (const auto& c : cases)
            if (!(c.max_rel_error < tolerance)) return false;
        return !cases.empty();
    }
};

namespace gc {

using ad::Tensor;
using Rng = std::mt19937_64;

inline constexpr double kStep = 1e-5;
inline constexpr std::size_t kCoordsPerTensor = 4;  // composite losses only

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<double> uniform_values(Rng& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

/// Values with |x| in [gap, 1] and random sign: keeps kinks at 0 out of reach of the stencil.
inline std::vector<double> away_from_zero(Rng& rng, std::size_t n, double gap) {
    auto v = uniform_values(rng, n, gap, 1.0);
    for (double& x : v)
        if (rng() & 1) x = -x;
    return v;
}

inline Tensor param(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
    auto v = uniform_values(rng, ad::numel(shape), lo, hi);
    return Tensor::parameter(std::move(shape), std::move(v));
}

inline Tensor constant(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
    auto v = uniform_values(rng, ad::numel(shape), lo, hi);
    return Tensor::constant(std::move(shape), std::move(v));
}

inline ad::Shape random_matrix_shape(Rng& rng) { return {uniform_size(rng, 1, 4), uniform_size(rng, 1, 4)}; }

using Instance = std::function<GradCheckResult(Rng&)>;

inline GradCheckResult unary(Rng& rng, const std::function<Tensor(const Tensor&)>& op, Tensor x) {
    auto w = constant(rng, x.shape(), 0.5, 1.5);
    return check_gradients([&] { return ad::sum(ad::mul(op(x), w)); }, {x}, kStep);
}

inline GradCheckResult binary(Rng& rng, const std::function<Tensor(const Tensor&, const Tensor&)>& op) {
    auto shape = random_matrix_shape(rng);
    auto a = param(rng, shape), b = param(rng, shape);
    auto w = constant(rng, shape, 0.5, 1.5);
    return check_gradients([&] { return ad::sum(ad::mul(op(a, b), w)); }, {a, b}, kStep);
}

// --- composite fixtures ----------------------------------------------------

inline AgentGraph random_graph(Rng& rng, std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
    return AgentGraph::from_edges(n, edges);
}

inline GradCheckResult q_loss_instance(Rng& rng, q::Variant variant) {
    const std::size_t n = uniform_size(rng, 2, 4);
    const auto graph = random_graph(rng, n);
    std::vector<q::AgentSpec> agents;
    for (std::size_t i = 0; i < n; ++i) agents.push_back({uniform_size(rng, 1, 4), uniform_size(rng, 2, 4)});
    auto config = q::NccQConfig::for_variant(variant, 0.3);
    config.hidden_dim = 4;
    config.latent_dim = 3;
    config.decoder_hidden = 4;
    config.q_hidden = 4;
    config.gamma = 0.9;
    config.activation = Activation::tanh;
    config.stop_grad_neighbors = false;  // a stop-gradient is deliberately not the true derivative
    auto init = Rng(rng());
    q::NccQNet net(config, agents, init);
    auto target = net.clone();
    for (auto& t : tensors_of(target.parameters()))
        for (double& v : t.data_mut()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<q::Transition> rows(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& t : rows) {
        for (const auto& a : agents) {
            t.observations.push_back(uniform_values(rng, a.obs_dim, -1, 1));
            t.next_observations.push_back(uniform_values(rng, a.obs_dim, -1, 1));
            t.actions.push_back(uniform_size(rng, 0, a.n_actions - 1));
        }
        t.reward = normal(rng);
        t.terminal = rng() % 4 == 0;
    }
    std::vector<const q::Transition*> ptrs;
    for (const auto& t : rows) ptrs.push_back(&t);
    const auto batch = q::make_batch(ptrs, agents);
    const GaussianStream eps0{Rng(rng())};
    auto loss_fn = [&] {
        GaussianStream eps = eps0;
        return q::total_loss(net, target, graph, batch, config, eps).total;
    };
    Rng pick(rng());
    QuietWarnings quiet;
    return check_gradients(loss_fn, tensors_of(net.parameters()), kStep, kCoordsPerTensor, &pick);
}

struct AcFixture {
    AgentGraph graph;
    std::vector<ac::AgentSpec> agents;
    ac::NccAcConfig config;
    ac::Batch batch;
};

inline AcFixture ac_fixture(Rng& rng, ac::Variant variant) {
    AcFixture f;
    const std::size_t n = uniform_size(rng, 2, 4);
    f.graph = random_graph(rng, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> segs(uniform_size(rng, 1, 2));
        for (auto& s : segs) s = uniform_size(rng, 1, 3);
        f.agents.push_back({uniform_size(rng, 1, 4), segs});
    }
    f.config = ac::NccAcConfig::for_variant(variant, 0.3);
    f.config.actor_hidden = 4;
    f.config.hidden_dim = 4;
    f.config.latent_dim = 3;
    f.config.decoder_hidden = 4;
    f.config.q_hidden = 4;
    f.config.gamma = 0.9;
    f.config.activation = Activation::tanh;
    std::vector<ac::Transition> rows(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& t : rows) {
        for (const auto& a : f.agents) {
            t.observations.push_back(uniform_values(rng, a.obs_dim, -1, 1));
            t.next_observations.push_back(uniform_values(rng, a.obs_dim, -1, 1));
            std::vector<double> act;
            for (auto w : a.segments) {
                auto seg = uniform_values(rng, w, 0.1, 1.0);
                double total = 0.0;
                for (double v : seg) total += v;
                for (double v : seg) act.push_back(v / total);
            }
            t.actions.push_back(act);
        }
        t.reward = normal(rng);
        t.terminal = rng() % 4 == 0;
    }
    std::vector<const ac::Transition*> ptrs;
    for (const auto& t : rows) ptrs.push_back(&t);
    f.batch = ac::make_batch(ptrs, f.agents);
    return f;
}

inline GradCheckResult critic_loss_instance(Rng& rng, ac::Variant variant) {
    auto f = ac_fixture(rng, variant);
    const std::size_t n = f.agents.size();
    auto init = Rng(rng());
    std::vector<ac::NccCritic> critics;
    for (std::size_t i = 0; i < n; ++i) critics.emplace_back(f.config, f.graph, f.agents, i, init);
    const std::size_t owner = uniform_size(rng, 0, n - 1);
    auto target = critics[owner].clone();
    const auto y = ac::critic_td_target(target, f.graph, f.batch.reward, f.batch.next_obs, f.batch.actions,
                                        f.batch.terminal, f.config.gamma);
    const GaussianStream eps0{Rng(rng())};
    const auto nbrs = f.graph.neighbors(owner);
    auto loss_fn = [&] {
        GaussianStream eps = eps0;
        auto own = ac::critic_forward(critics[owner], f.graph, f.batch.obs, f.batch.actions, false, &eps);
        std::vector<GaussianLatent> latents;
        for (auto j : nbrs)
            latents.push_back(ac::critic_forward(critics[j], f.graph, f.batch.obs, f.batch.actions, false, &eps).latent);
        auto cd = ac::critic_cd_loss(own, f.batch.obs[owner], f.batch.actions[owner], latents, f.config.cd_mode);
        return ad::add(ac::critic_td_loss(own, y), ad::scale(cd, f.config.alpha));
    };
    std::vector<NamedTensor> params;
    critics[owner].collect("own", params);
    for (auto j : nbrs) critics[j].collect("nbr" + std::to_string(j), params);
    Rng pick(rng());
    QuietWarnings quiet;
    return check_gradients(loss_fn, tensors_of(params), kStep, kCoordsPerTensor, &pick);
}

inline GradCheckResult actor_objective_instance(Rng& rng) {
    auto f = ac_fixture(rng, ac::Variant::ncc);
    const std::size_t owner = uniform_size(rng, 0, f.agents.size() - 1);
    auto init = Rng(rng());
    ac::Actor actor(f.agents[owner], f.config.actor_hidden, init, f.config.activation);
    ac::NccCritic critic(f.config, f.graph, f.agents, owner, init);
    auto loss_fn = [&] {
        auto acts = f.batch.actions;
        acts[owner] = ac::actor_forward(actor, f.batch.obs[owner]);
        return ad::negate(ad::mean(ac::critic_forward(critic, f.graph, f.batch.obs, acts, true).q));
    };
    std::vector<NamedTensor> params;
    actor.collect("actor", params);
    return check_gradients(loss_fn, tensors_of(params), kStep);
}

inline GaussianLatent random_latent(Rng& rng, ad::Shape shape) {
    return {param(rng, shape), param(rng, shape, -1.0, 0.5)};
}

inline std::vector<std::pair<std::string, Instance>> cases() {
    std::vector<std::pair<std::string, Instance>> out;
    auto add = [&](std::string name, Instance f) { out.emplace_back(std::move(name), std::move(f)); };

    add("add", [](Rng& r) { return binary(r, [](const Tensor& a, const Tensor& b) { return ad::add(a, b); }); });
    add("sub", [](Rng& r) { return binary(r, [](const Tensor& a, const Tensor& b) { return ad::sub(a, b); }); });
    add("mul", [](Rng& r) { return binary(r, [](const Tensor& a, const Tensor& b) { return ad::mul(a, b); }); });
    add("relu", [](Rng& r) {
        auto s = random_matrix_shape(r);
        return unary(r, [](const Tensor& x) { return ad::relu(x); }, Tensor::parameter(s, away_from_zero(r, ad::numel(s), 0.05)));
    });
    add("tanh", [](Rng& r) { return unary(r, [](const Tensor& x) { return ad::tanh(x); }, param(r, random_matrix_shape(r), -2, 2)); });
    add("exp", [](Rng& r) { return unary(r, [](const Tensor& x) { return ad::exp(x); }, param(r, random_matrix_shape(r), -2, 2)); });
    add("log", [](Rng& r) { return unary(r, [](const Tensor& x) { return ad::log(x); }, param(r, random_matrix_shape(r), 0.2, 3)); });
    add("square", [](Rng& r) { return unary(r, [](const Tensor& x) { return ad::square(x); }, param(r, random_matrix_shape(r))); });
    add("negate", [](Rng& r) { return unary(r, [](const Tensor& x) { return ad::negate(x); }, param(r, random_matrix_shape(r))); });
    add("scale", [](Rng& r) {
        const double c = uniform_values(r, 1, -3, 3)[0];
        return unary(r, [c](const Tensor& x) { return ad::scale(x, c); }, param(r, random_matrix_shape(r)));
    });
    add("add_scalar", [](Rng& r) {
        const double c = uniform_values(r, 1, -3, 3)[0];
        return unary(r, [c](const Tensor& x) { return ad::add_scalar(x, c); }, param(r, random_matrix_shape(r)));
    });
    add("clamp", [](Rng& r) {
        // bounds at ±0.5; values stay at least 0.05 from either bound
        auto s = random_matrix_shape(r);
        std::vector<double> v(ad::numel(s));
        for (double& x : v) {
            const auto band = r() % 3;
            x = band == 0 ? uniform_values(r, 1, -1.0, -0.55)[0]
                : band == 1 ? uniform_values(r, 1, -0.45, 0.45)[0]
                            : uniform_values(r, 1, 0.55, 1.0)[0];
        }
        return unary(r, [](const Tensor& x) { return ad::clamp(x, -0.5, 0.5); }, Tensor::parameter(s, v));
    });
    add("matmul", [](Rng& r) {
        const auto m = uniform_size(r, 1, 4), k = uniform_size(r, 1, 4), n = uniform_size(r, 1, 4);
        auto a = param(r, {m, k}), b = param(r, {k, n});
        auto w = constant(r, {m, n}, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::matmul(a, b), w)); }, {a, b}, kStep);
    });
    add("add_bias", [](Rng& r) {
        const auto m = uniform_size(r, 1, 4), n = uniform_size(r, 1, 4);
        auto x = param(r, {m, n}), b = param(r, {n});
        auto w = constant(r, {m, n}, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::add_bias(x, b), w)); }, {x, b}, kStep);
    });
    add("reshape", [](Rng& r) {
        const auto m = uniform_size(r, 1, 4), n = uniform_size(r, 1, 4);
        auto x = param(r, {m, n});
        auto w = constant(r, {n * m}, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::square(ad::reshape(x, {n * m})), w)); }, {x}, kStep);
    });
    add("sum", [](Rng& r) {
        auto x = param(r, random_matrix_shape(r));
        const int axis = static_cast<int>(r() % 3) - 1;
        auto w = constant(r, axis < 0 ? ad::Shape{} : ad::Shape{x.dim(axis == 0 ? 1 : 0)}, 0.5, 1.5);
        return check_gradients(
            [&] {
                auto s = axis < 0 ? ad::sum(ad::square(x)) : ad::sum(ad::square(x), static_cast<std::size_t>(axis));
                return ad::sum(ad::mul(s, w));
            },
            {x}, kStep);
    });
    add("mean", [](Rng& r) {
        auto x = param(r, random_matrix_shape(r));
        const int axis = static_cast<int>(r() % 3) - 1;
        auto w = constant(r, axis < 0 ? ad::Shape{} : ad::Shape{x.dim(axis == 0 ? 1 : 0)}, 0.5, 1.5);
        return check_gradients(
            [&] {
                auto s = axis < 0 ? ad::mean(ad::square(x)) : ad::mean(ad::square(x), static_cast<std::size_t>(axis));
                return ad::sum(ad::mul(s, w));
            },
            {x}, kStep);
    });
    add("softmax_segments", [](Rng& r) {
        std::vector<std::size_t> segs(uniform_size(r, 1, 3));
        std::size_t width = 0;
        for (auto& s : segs) width += (s = uniform_size(r, 1, 4));
        auto x = param(r, {uniform_size(r, 1, 3), width}, -2, 2);
        auto w = constant(r, x.shape(), -1.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::softmax_segments(x, segs), w)); }, {x}, kStep);
    });
    add("gather_cols", [](Rng& r) {
        auto x = param(r, random_matrix_shape(r));
        std::vector<std::size_t> idx(x.dim(0));
        for (auto& i : idx) i = uniform_size(r, 0, x.dim(1) - 1);
        auto w = constant(r, {x.dim(0)}, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::square(ad::gather_cols(x, idx)), w)); }, {x}, kStep);
    });
    add("weighted_sum_canonical", [](Rng& r) {
        auto shape = random_matrix_shape(r);
        std::vector<Tensor> terms(uniform_size(r, 1, 5));
        for (auto& t : terms) t = param(r, shape);
        auto weights = uniform_values(r, terms.size(), -2, 2);
        auto w = constant(r, shape, 0.5, 1.5);
        return check_gradients(
            [&] { return ad::sum(ad::mul(ad::square(ad::weighted_sum_canonical(terms, weights)), w)); }, terms, kStep);
    });
    add("mse", [](Rng& r) {
        auto shape = random_matrix_shape(r);
        auto a = param(r, shape), b = param(r, shape);
        return check_gradients([&] { return ad::mse(a, b); }, {a, b}, kStep);
    });
    add("dense", [](Rng& r) {
        auto init = Rng(r());
        Dense layer(uniform_size(r, 1, 4), uniform_size(r, 1, 4), init);
        for (double& b : layer.bias.data_mut()) b = uniform_values(r, 1, -1, 1)[0];
        auto x = param(r, {uniform_size(r, 1, 3), layer.in_dim()});
        auto w = constant(r, {x.dim(0), layer.out_dim()}, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::tanh(layer(x)), w)); }, {layer.weight, layer.bias, x},
                               kStep);
    });
    add("gcn_forward", [](Rng& r) {
        const std::size_t n = uniform_size(r, 1, 6), d_in = uniform_size(r, 1, 4), d_out = uniform_size(r, 1, 4);
        const auto graph = random_graph(r, n);
        GcnLayer layer(param(r, {d_in, d_out}), Activation::tanh);
        const std::size_t batch = uniform_size(r, 1, 3);
        std::vector<Tensor> h;
        for (std::size_t i = 0; i < n; ++i) h.push_back(param(r, {batch, d_in}));
        std::vector<Tensor> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(constant(r, {batch, d_out}, 0.5, 1.5));
        std::vector<Tensor> params = h;
        params.push_back(layer.weight);
        return check_gradients(
            [&] {
                auto out = gcn_forward(layer, graph, h);
                std::vector<Tensor> parts;
                for (std::size_t i = 0; i < n; ++i) parts.push_back(ad::sum(ad::mul(out[i], w[i])));
                return ad::add_all(parts);
            },
            params, kStep);
    });
    add("sample", [](Rng& r) {
        const ad::Shape s{uniform_size(r, 1, 3), uniform_size(r, 1, 4)};
        auto latent = random_latent(r, s);
        auto eps = constant(r, s, -2, 2);
        auto w = constant(r, s, 0.5, 1.5);
        return check_gradients([&] { return ad::sum(ad::mul(ad::square(sample(latent, eps)), w)); },
                               {latent.mu, latent.log_sigma}, kStep);
    });
    add("kl_diag_gaussians", [](Rng& r) {
        const ad::Shape s = (r() & 1) ? ad::Shape{uniform_size(r, 1, 5)} : ad::Shape{uniform_size(r, 1, 3), uniform_size(r, 1, 4)};
        auto p = random_latent(r, s), q = random_latent(r, s);
        return check_gradients([&] { return kl_diag_gaussians(p, q); }, {p.mu, p.log_sigma, q.mu, q.log_sigma}, kStep);
    });
    add("kl_to_unit_gaussian", [](Rng& r) {
        auto p = random_latent(r, {uniform_size(r, 1, 3), uniform_size(r, 1, 4)});
        return check_gradients([&] { return kl_to_unit_gaussian(p); }, {p.mu, p.log_sigma}, kStep);
    });
    add("cognition_cd_loss", [](Rng& r) {
        CognitionHeadConfig hc;
        hc.input_dim = hc.agent_input_dim = uniform_size(r, 1, 4);
        hc.latent_dim = uniform_size(r, 1, 3);
        hc.decoder_hidden = uniform_size(r, 1, 4);
        hc.obs_dim = uniform_size(r, 1, 4);
        hc.hidden_activation = Activation::tanh;
        auto init = Rng(r());
        CognitionHead head(hc, init);
        const std::size_t batch = uniform_size(r, 1, 3);
        auto H = param(r, {batch, hc.input_dim});
        auto obs = constant(r, {batch, hc.obs_dim});
        auto eps = constant(r, {batch, hc.latent_dim}, -2, 2);
        std::vector<GaussianLatent> nbrs(uniform_size(r, 1, 3));
        for (auto& q : nbrs) q = random_latent(r, {batch, hc.latent_dim});
        const auto mode = (r() & 1) ? CdMode::neighborhood : CdMode::global_unit;
        auto w_agent = constant(r, {batch, hc.latent_dim}, 0.5, 1.5);
        std::vector<NamedTensor> named;
        head.collect("head", named);
        auto params = tensors_of(named);
        params.push_back(H);
        for (const auto& q : nbrs) {
            params.push_back(q.mu);
            params.push_back(q.log_sigma);
        }
        return check_gradients(
            [&] {
                auto enc = head.encode(H);
                auto rec = head.reconstruct(sample(enc.latent, eps));
                std::vector<ReconstructionTerm> terms{{obs, rec.obs}};
                return ad::add(cd_loss(terms, enc.latent, nbrs, mode), ad::sum(ad::mul(enc.agent, w_agent)));
            },
            params, kStep);
    });
    add("q_loss_vdn", [](Rng& r) { return q_loss_instance(r, q::Variant::vdn); });
    add("q_loss_idqn", [](Rng& r) { return q_loss_instance(r, q::Variant::idqn); });
    add("q_loss_graph", [](Rng& r) { return q_loss_instance(r, q::Variant::graph); });
    add("q_loss_ncc", [](Rng& r) { return q_loss_instance(r, q::Variant::ncc); });
    add("q_loss_gcc", [](Rng& r) { return q_loss_instance(r, q::Variant::gcc); });
    add("critic_loss_ncc", [](Rng& r) { return critic_loss_instance(r, ac::Variant::ncc); });
    add("critic_loss_gcc", [](Rng& r) { return critic_loss_instance(r, ac::Variant::gcc); });
    add("actor_objective", [](Rng& r) { return actor_objective_instance(r); });
    return out;
}

} // namespace gc

/// Runs every case on `instances` random draws; instance k of case c uses its
/// own generator seeded from (seed, c, k).
inline GradCheckReport run_gradcheck_suite(std::size_t instances = 100, std::uint64_t seed = 0,
                                           const std::function<void(const GradCheckCase&)>& on_case = {}) {
    GradCheckReport report;
    const auto start = std::chrono::steady_clock::now();
    const auto all = gc::cases();
    for (std::size_t c = 0; c < all.size(); ++c) {
        GradCheckCase out;
        out.name = all[c].first;
        const auto case_start = std::chrono::steady_clock::now();
        for (std::size_t k = 0; k < instances; ++k) {
            std::seed_seq seq{seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)};
            gc::Rng rng(seq);
            auto res = all[c].second(rng);
            out.max_rel_error = std::max(out.max_rel_error, res.max_rel_error);
            out.coordinates += res.coordinates;
            ++out.instances;
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - case_start).count();
        if (on_case) on_case(out);
        report.cases.push_back(std::move(out));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace ncc::verify
