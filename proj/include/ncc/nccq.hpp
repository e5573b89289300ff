#pragma once

// Value-decomposition learner with graph convolution and a cognition head.
// Per agent: o_i -> FC -> h_i -> GCN -> H_i -> (A_i, q(C_i)) -> A_i + Ĉ_i -> Q head.
// Variants switch modules off: VDN drops GCN and cognition, IDQN also drops mixing.

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ncc/cognition.hpp"
#include "ncc/consistency.hpp"
#include "ncc/graph.hpp"
#include "ncc/nn.hpp"
#include "ncc/replay.hpp"

namespace ncc::q {

enum class Variant { ncc, graph, gcc, vdn, idqn };

inline std::string to_string(Variant v) {
    switch (v) {
    case Variant::ncc: return "NCC_Q";
    case Variant::graph: return "GRAPH_Q";
    case Variant::gcc: return "GCC_Q";
    case Variant::vdn: return "VDN";
    case Variant::idqn: return "IDQN";
    }
    return "NCC_Q";
}

/// Which modules a network is built with.
struct Modules {
    bool gcn = true;
    bool cognition = true;
    bool mixing = true;
    CdMode cd_mode = CdMode::neighborhood;

    bool operator==(const Modules&) const = default;
};

inline Modules modules_for(Variant v) {
    switch (v) {
    case Variant::ncc:
    case Variant::graph: return {};
    case Variant::gcc: return {true, true, true, CdMode::global_unit};
    case Variant::vdn: return {false, false, true, CdMode::neighborhood};
    case Variant::idqn: return {false, false, false, CdMode::neighborhood};
    }
    return {};
}

struct NccQConfig {
    Modules modules;
    double alpha = 0.1;  // CD-loss weight
    double gamma = 0.98;
    std::size_t hidden_dim = 32;
    std::size_t latent_dim = 16;
    std::size_t decoder_hidden = 32;
    std::size_t q_hidden = 32;
    bool share_all = false;  // one encoder and Q head for every agent
    Activation activation = Activation::relu;
    bool stop_grad_neighbors = false;
    ad::OptimizerConfig optimizer;
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 100000;
    std::size_t target_sync_interval = 200;

    /// Variant defaults; GRAPH_Q has no CD term.
    static NccQConfig for_variant(Variant v, double alpha = 0.1) {
        NccQConfig c;
        c.modules = modules_for(v);
        c.alpha = v == Variant::graph ? 0.0 : alpha;
        return c;
    }

    bool cd_enabled() const { return modules.cognition && alpha > 0.0; }
};

struct AgentSpec {
    std::size_t obs_dim = 0;
    std::size_t n_actions = 0;
    bool operator==(const AgentSpec&) const = default;
};

class NccQNet {
public:
    NccQNet() = default;
    NccQNet(const NccQConfig& config, std::vector<AgentSpec> agents, std::mt19937_64& rng)
        : modules_(config.modules), activation_(config.activation), agents_(std::move(agents)) {
        if (agents_.empty()) throw Error(ErrorKind::invalid_argument, "NccQNet needs at least one agent");
        std::size_t max_obs = 0;
        for (const auto& a : agents_) {
            if (a.obs_dim == 0 || a.n_actions == 0)
                throw Error(ErrorKind::invalid_argument, "every agent needs a positive observation width and action count");
            if (config.share_all && a != agents_[0])
                throw Error(ErrorKind::config, "share_all requires identical observation and action sizes");
            max_obs = std::max(max_obs, a.obs_dim);
        }
        const std::size_t owners = config.share_all ? 1 : agents_.size();
        for (std::size_t i = 0; i < owners; ++i) encoders_.emplace_back(agents_[i].obs_dim, config.hidden_dim, rng);
        if (modules_.gcn) gcn_ = GcnLayer(config.hidden_dim, config.hidden_dim, rng, activation_);
        if (modules_.cognition) {
            CognitionHeadConfig hc;
            hc.input_dim = config.hidden_dim;
            hc.agent_input_dim = config.hidden_dim;
            hc.latent_dim = config.latent_dim;
            hc.decoder_hidden = config.decoder_hidden;
            hc.obs_dim = max_obs;
            hc.hidden_activation = activation_;
            head_ = CognitionHead(hc, rng);
        }
        const std::size_t z = modules_.cognition ? config.latent_dim : config.hidden_dim;
        for (std::size_t i = 0; i < owners; ++i) {
            q_hidden_.emplace_back(z, config.q_hidden, rng);
            q_out_.emplace_back(config.q_hidden, agents_[i].n_actions, rng);
        }
    }

    const Modules& modules() const { return modules_; }
    Activation activation() const { return activation_; }
    const std::vector<AgentSpec>& agents() const { return agents_; }
    std::size_t n_agents() const { return agents_.size(); }
    std::size_t max_obs_dim() const {
        std::size_t m = 0;
        for (const auto& a : agents_) m = std::max(m, a.obs_dim);
        return m;
    }

    const Dense& encoder(std::size_t i) const { return encoders_[encoders_.size() == 1 ? 0 : i]; }
    const Dense& q_hidden(std::size_t i) const { return q_hidden_[q_hidden_.size() == 1 ? 0 : i]; }
    const Dense& q_out(std::size_t i) const { return q_out_[q_out_.size() == 1 ? 0 : i]; }
    const std::optional<GcnLayer>& gcn() const { return gcn_; }
    const std::optional<CognitionHead>& head() const { return head_; }

    std::vector<NamedTensor> parameters() const {
        std::vector<NamedTensor> out;
        for (std::size_t i = 0; i < encoders_.size(); ++i) encoders_[i].collect("encoder." + std::to_string(i), out);
        if (gcn_) out.push_back({"gcn.weight", gcn_->weight});
        if (head_) head_->collect("cognition", out);
        for (std::size_t i = 0; i < q_hidden_.size(); ++i) {
            q_hidden_[i].collect("q." + std::to_string(i) + ".hidden", out);
            q_out_[i].collect("q." + std::to_string(i) + ".out", out);
        }
        return out;
    }

    NccQNet clone() const {
        NccQNet c;
        c.modules_ = modules_;
        c.activation_ = activation_;
        c.agents_ = agents_;
        for (const auto& e : encoders_) c.encoders_.push_back(e.clone());
        if (gcn_) c.gcn_ = gcn_->clone();
        if (head_) c.head_ = head_->clone();
        for (const auto& d : q_hidden_) c.q_hidden_.push_back(d.clone());
        for (const auto& d : q_out_) c.q_out_.push_back(d.clone());
        return c;
    }

private:
    Modules modules_;
    Activation activation_ = Activation::relu;
    std::vector<AgentSpec> agents_;
    std::vector<Dense> encoders_;
    std::optional<GcnLayer> gcn_;
    std::optional<CognitionHead> head_;
    std::vector<Dense> q_hidden_;
    std::vector<Dense> q_out_;
};

struct QForward {
    std::vector<ad::Tensor> q;  // [batch, n_actions_i]
    std::vector<std::optional<GaussianLatent>> latents;
    std::vector<std::optional<ad::Tensor>> reconstructions;  // [batch, max_obs_dim]; training mode only
};

/// Per-agent action values for row-batched observations obs[i] : [batch, obs_dim_i].
/// Training mode samples Ĉ_i with epsilon from `reparam`; eval mode uses the latent mean.
inline QForward q_forward(const NccQNet& net, const AgentGraph& graph, std::span<const ad::Tensor> obs,
                          bool eval_mode, GaussianStream* reparam = nullptr) {
    const std::size_t n = net.n_agents();
    if (obs.size() != n || graph.size() != n)
        throw Error(ErrorKind::shape_mismatch, "q_forward: " + std::to_string(obs.size()) + " observation tensors and " +
                                                   std::to_string(graph.size()) + " graph nodes for " +
                                                   std::to_string(n) + " agents");
    std::vector<ad::Tensor> h;
    h.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (obs[i].rank() != 2 || obs[i].dim(1) != net.agents()[i].obs_dim)
            throw Error(ErrorKind::shape_mismatch, "agent " + std::to_string(i) + " observation " +
                                                       shape_string(obs[i].shape()) + ", expected [batch, " +
                                                       std::to_string(net.agents()[i].obs_dim) + "]");
        h.push_back(activate(net.activation(), net.encoder(i)(obs[i])));
    }
    const auto H = net.gcn() ? gcn_forward(*net.gcn(), graph, h) : h;

    QForward out;
    out.latents.resize(n);
    out.reconstructions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ad::Tensor z = H[i];
        if (net.head()) {
            auto enc = net.head()->encode(H[i]);
            ad::Tensor c;
            if (eval_mode) {
                c = enc.latent.mu;
            } else {
                if (!reparam) throw Error(ErrorKind::invalid_argument, "q_forward: training mode needs a reparameterization stream");
                c = sample(enc.latent, reparam->tensor(enc.latent.mu.shape()));
                out.reconstructions[i] = net.head()->reconstruct(c).obs;
            }
            z = ad::add(enc.agent, c);
            out.latents[i] = enc.latent;
        }
        out.q.push_back(net.q_out(i)(activate(net.activation(), net.q_hidden(i)(z))));
    }
    return out;
}

/// Q_total = Σ_i Q_i, summed in agent order.
inline double mix(std::span<const double> chosen) {
    double acc = 0.0;
    for (double v : chosen) acc += v;
    return acc;
}

/// Row-wise Q_total from per-agent [batch] tensors. Each row is summed in
/// ascending order of its addends, so agent order does not matter.
inline ad::Tensor mix(std::span<const ad::Tensor> chosen) {
    std::vector<double> ones(chosen.size(), 1.0);
    return ad::weighted_sum_canonical(chosen, ones);
}

/// Σ_i max_a q[i][a]: the joint maximum of an additive value, agent by agent.
inline double decomposed_max(const std::vector<std::vector<double>>& q) {
    double acc = 0.0;
    for (const auto& row : q) acc += *std::max_element(row.begin(), row.end());
    return acc;
}

inline std::vector<double> row_max(const ad::Tensor& q) {
    const std::size_t rows = q.dim(0), cols = q.dim(1);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto* row = q.data().data() + r * cols;
        out[r] = *std::max_element(row, row + cols);
    }
    return out;
}

inline std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

struct Transition {
    std::vector<std::vector<double>> observations;
    std::vector<std::size_t> actions;
    double reward = 0.0;
    std::vector<std::vector<double>> next_observations;
    bool terminal = false;
};

/// Column-major view of a minibatch: one tensor per agent.
struct Batch {
    std::vector<ad::Tensor> obs;
    std::vector<ad::Tensor> next_obs;
    std::vector<std::vector<std::size_t>> actions;  // [agent][row]
    std::vector<double> reward;
    std::vector<double> terminal;  // 1.0 at terminal rows
    std::size_t size() const { return reward.size(); }
};

inline Batch make_batch(std::span<const Transition* const> rows, const std::vector<AgentSpec>& agents) {
    if (rows.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
    Batch b;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        std::vector<const std::vector<double>*> o, o2;
        std::vector<std::size_t> a;
        for (const auto* t : rows) {
            o.push_back(&t->observations.at(i));
            o2.push_back(&t->next_observations.at(i));
            a.push_back(t->actions.at(i));
        }
        b.obs.push_back(stack_rows(o, agents[i].obs_dim));
        b.next_obs.push_back(stack_rows(o2, agents[i].obs_dim));
        b.actions.push_back(std::move(a));
    }
    for (const auto* t : rows) {
        b.reward.push_back(t->reward);
        b.terminal.push_back(t->terminal ? 1.0 : 0.0);
    }
    return b;
}

/// y = r + γ (1 − terminal) Σ_i max_a Q⁻_i(o′_i, a), evaluated with latent means.
inline std::vector<double> td_target(const NccQNet& target, const AgentGraph& graph, std::span<const double> reward,
                                     std::span<const ad::Tensor> next_obs, std::span<const double> terminal,
                                     double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw Error(ErrorKind::domain, "gamma must lie in [0, 1]");
    const auto fwd = q_forward(target, graph, next_obs, true);
    std::vector<std::vector<double>> maxima;
    for (const auto& q : fwd.q) maxima.push_back(row_max(q));
    std::vector<double> y(reward.size());
    for (std::size_t r = 0; r < y.size(); ++r) {
        std::vector<double> best(maxima.size());
        for (std::size_t i = 0; i < maxima.size(); ++i) best[i] = maxima[i][r];
        y[r] = terminal[r] > 0.0 ? reward[r] : reward[r] + gamma * mix(best);
    }
    return y;
}

/// Independent per-agent targets r + γ (1 − terminal) max_a Q⁻_i(o′_i, a).
inline std::vector<std::vector<double>> td_targets_per_agent(const NccQNet& target, const AgentGraph& graph,
                                                             std::span<const double> reward,
                                                             std::span<const ad::Tensor> next_obs,
                                                             std::span<const double> terminal, double gamma) {
    const auto fwd = q_forward(target, graph, next_obs, true);
    std::vector<std::vector<double>> y;
    for (const auto& q : fwd.q) {
        auto m = row_max(q);
        for (std::size_t r = 0; r < m.size(); ++r) m[r] = terminal[r] > 0.0 ? reward[r] : reward[r] + gamma * m[r];
        y.push_back(std::move(m));
    }
    return y;
}

struct LossParts {
    ad::Tensor total;
    double td = 0.0;
    double cd = 0.0;
    QForward forward;
};

/// mean_b (y − Q_total)² + α Σ_i cd_i; without mixing, Σ_i mean_b (y_i − Q_i)².
inline LossParts total_loss(const NccQNet& net, const NccQNet& target, const AgentGraph& graph, const Batch& batch,
                            const NccQConfig& config, GaussianStream& reparam) {
    LossParts parts;
    parts.forward = q_forward(net, graph, batch.obs, false, &reparam);
    const auto& fwd = parts.forward;
    const std::size_t n = net.n_agents();
    std::vector<ad::Tensor> chosen;
    for (std::size_t i = 0; i < n; ++i) chosen.push_back(ad::gather_cols(fwd.q[i], batch.actions[i]));

    ad::Tensor td;
    if (net.modules().mixing) {
        auto y = td_target(target, graph, batch.reward, batch.next_obs, batch.terminal, config.gamma);
        td = ad::mse(ad::Tensor::vector(std::move(y)), mix(chosen));
    } else {
        auto y = td_targets_per_agent(target, graph, batch.reward, batch.next_obs, batch.terminal, config.gamma);
        std::vector<ad::Tensor> per_agent;
        for (std::size_t i = 0; i < n; ++i) per_agent.push_back(ad::mse(ad::Tensor::vector(std::move(y[i])), chosen[i]));
        td = ad::add_all(per_agent);
    }
    parts.td = td.item();
    parts.total = td;

    if (config.cd_enabled()) {
        const std::size_t width = net.max_obs_dim();
        std::vector<ad::Tensor> cds;
        for (std::size_t i = 0; i < n; ++i) {
            // Narrower observations are zero-padded to the shared decoder width.
            auto padded = batch.obs[i];
            const std::size_t d = net.agents()[i].obs_dim;
            if (d < width) {
                std::vector<double> v(batch.size() * width, 0.0);
                for (std::size_t r = 0; r < batch.size(); ++r)
                    std::copy_n(batch.obs[i].data().data() + r * d, d, v.begin() + static_cast<std::ptrdiff_t>(r * width));
                padded = ad::Tensor::constant({batch.size(), width}, std::move(v));
            }
            ReconstructionTerm term{padded, *fwd.reconstructions[i]};
            std::vector<GaussianLatent> nbrs;
            for (std::size_t j : graph.neighbors(i)) nbrs.push_back(*fwd.latents[j]);
            cds.push_back(cd_loss(std::span(&term, 1), *fwd.latents[i], nbrs, config.modules.cd_mode,
                                  config.stop_grad_neighbors));
        }
        auto cd = ad::add_all(cds);
        parts.cd = cd.item();
        parts.total = ad::add(td, ad::scale(cd, config.alpha));
    }
    return parts;
}

struct TrainMetrics {
    double loss = 0.0;
    double td = 0.0;
    double cd = 0.0;
    double neighbor_kl = 0.0;
    std::vector<double> cognition;  // per agent; 0 without a cognition head
};

/// Online and target networks, optimizer, replay and random streams for one run.
class NccQLearner {
public:
    NccQLearner(NccQConfig config, AgentGraph graph, std::vector<AgentSpec> agents, std::uint64_t seed)
        : config_(std::move(config)),
          graph_(std::move(graph)),
          replay_(config_.replay_capacity),
          explore_(make_stream(seed, StreamId::explore)),
          reparam_(make_stream(seed, StreamId::reparam)),
          replay_rng_(make_stream(seed, StreamId::replay)) {
        auto init = make_stream(seed, StreamId::init);
        net_ = NccQNet(config_, std::move(agents), init);
        if (graph_.size() != net_.n_agents())
            throw Error(ErrorKind::config, "agent graph has " + std::to_string(graph_.size()) + " nodes for " +
                                               std::to_string(net_.n_agents()) + " agents");
        target_ = net_.clone();
        params_ = net_.parameters();
        optimizer_ = ad::Optimizer(config_.optimizer, tensors_of(params_));
    }

    const NccQConfig& config() const { return config_; }
    const AgentGraph& graph() const { return graph_; }
    const NccQNet& net() const { return net_; }
    const NccQNet& target() const { return target_; }
    const std::vector<NamedTensor>& parameters() const { return params_; }
    std::vector<NamedTensor> target_parameters() const { return target_.parameters(); }
    ReplayBuffer<Transition>& replay() { return replay_; }
    std::size_t updates() const { return updates_; }
    void set_lr(double lr) { optimizer_.set_lr(lr); }

    /// Greedy per-agent action values for one joint observation, latent means.
    std::vector<std::vector<double>> q_values(const std::vector<std::vector<double>>& observations) const {
        std::vector<ad::Tensor> obs;
        for (const auto& o : observations) obs.push_back(ad::Tensor::constant({1, o.size()}, o));
        const auto fwd = q_forward(net_, graph_, obs, true);
        std::vector<std::vector<double>> out;
        for (const auto& q : fwd.q) out.emplace_back(q.data().begin(), q.data().end());
        return out;
    }

    /// ε-greedy: each agent independently explores with probability ε.
    std::vector<std::size_t> act(const std::vector<std::vector<double>>& observations, double epsilon) {
        if (epsilon < 0.0 || epsilon > 1.0) throw Error(ErrorKind::domain, "exploration rate must lie in [0, 1]");
        const auto q = q_values(observations);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::vector<std::size_t> actions(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (coin(explore_.engine()) < epsilon) {
                std::uniform_int_distribution<std::size_t> pick(0, q[i].size() - 1);
                actions[i] = pick(explore_.engine());
            } else {
                actions[i] = argmax(q[i]);
            }
        }
        return actions;
    }

    std::vector<std::size_t> greedy(const std::vector<std::vector<double>>& observations) const {
        const auto q = q_values(observations);
        std::vector<std::size_t> actions;
        for (const auto& row : q) actions.push_back(argmax(row));
        return actions;
    }

    void store(Transition t) { replay_.push(std::move(t)); }

    /// One gradient step on a sampled minibatch; nullopt while the buffer is underfilled.
    std::optional<TrainMetrics> train_step() {
        if (replay_.size() < config_.batch_size) {
            warn("train_step skipped: replay buffer holds fewer transitions than one batch");
            return std::nullopt;
        }
        const auto rows = replay_.sample(config_.batch_size, replay_rng_);
        const auto batch = make_batch(rows, net_.agents());
        return train_on(batch);
    }

    TrainMetrics train_on(const Batch& batch) {
        auto parts = total_loss(net_, target_, graph_, batch, config_, reparam_);
        TrainMetrics m;
        m.loss = parts.total.item();
        m.td = parts.td;
        m.cd = parts.cd;
        if (!std::isfinite(m.loss)) throw Error(ErrorKind::numeric, "non-finite training loss " + std::to_string(m.loss));
        m.neighbor_kl = mean_neighbor_kl(graph_, parts.forward.latents);
        for (const auto& l : parts.forward.latents) m.cognition.push_back(l ? cognition_value(*l) : 0.0);
        ad::backward(parts.total);
        optimizer_.step();
        ++updates_;
        if (config_.target_sync_interval > 0 && updates_ % config_.target_sync_interval == 0) sync_target();
        return m;
    }

    void sync_target() {
        auto dst = target_.parameters();
        copy_values(params_, dst);
    }

private:
    NccQConfig config_;
    AgentGraph graph_;
    NccQNet net_;
    NccQNet target_;
    std::vector<NamedTensor> params_;
    ad::Optimizer optimizer_;
    ReplayBuffer<Transition> replay_;
    GaussianStream explore_;
    GaussianStream reparam_;
    std::mt19937_64 replay_rng_;
    std::size_t updates_ = 0;
};

} // namespace ncc::q
