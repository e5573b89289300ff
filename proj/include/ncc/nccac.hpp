#pragma once

// Deterministic per-agent actors with per-agent critics. Critic i encodes the
// observations and actions of its closed neighborhood, runs one GCN per
// branch, sums the two, and feeds the cognition head; A_i comes straight from
// h_i^a. Agents with no action dimensions are passive: they have observations
// but no actor or critic.

#include <cmath>
#include <map>
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

namespace ncc::ac {

enum class Variant { ncc, graph, gcc };

inline std::string to_string(Variant v) {
    switch (v) {
    case Variant::ncc: return "NCC_AC";
    case Variant::graph: return "GRAPH_AC";
    case Variant::gcc: return "GCC_AC";
    }
    return "NCC_AC";
}

struct NccAcConfig {
    double alpha = 0.1;
    double gamma = 0.98;
    CdMode cd_mode = CdMode::neighborhood;
    bool stop_grad_neighbors = false;
    std::size_t actor_hidden = 32;
    std::size_t hidden_dim = 32;
    std::size_t latent_dim = 16;
    std::size_t decoder_hidden = 32;
    std::size_t q_hidden = 32;
    Activation activation = Activation::relu;
    ad::OptimizerConfig actor_optimizer;
    ad::OptimizerConfig critic_optimizer;
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 100000;
    std::size_t target_sync_interval = 200;
    double target_tau = 0.0;  // > 0: Polyak update every iteration instead of hard copies

    static NccAcConfig for_variant(Variant v, double alpha = 0.1) {
        NccAcConfig c;
        c.alpha = v == Variant::graph ? 0.0 : alpha;
        if (v == Variant::gcc) c.cd_mode = CdMode::global_unit;
        return c;
    }
};

struct AgentSpec {
    std::size_t obs_dim = 0;
    std::vector<std::size_t> segments;  // simplex widths; empty for passive agents

    std::size_t action_dim() const {
        std::size_t n = 0;
        for (auto w : segments) n += w;
        return n;
    }
    bool active() const { return !segments.empty(); }
};

// ---------------------------------------------------------------------------
// Actor
// ---------------------------------------------------------------------------

class Actor {
public:
    Actor() = default;
    Actor(const AgentSpec& spec, std::size_t hidden, std::mt19937_64& rng, Activation act = Activation::relu)
        : segments_(spec.segments), activation_(act), hidden_(spec.obs_dim, hidden, rng),
          out_(hidden, spec.action_dim(), rng) {}

    std::size_t obs_dim() const { return hidden_.in_dim(); }
    std::size_t action_dim() const { return out_.out_dim(); }
    const std::vector<std::size_t>& segments() const { return segments_; }

    ad::Tensor logits(const ad::Tensor& obs) const { return out_(activate(activation_, hidden_(obs))); }

    /// Deterministic action: one softmax per commodity segment.
    ad::Tensor operator()(const ad::Tensor& obs) const { return ad::softmax_segments(logits(obs), segments_); }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        hidden_.collect(prefix + ".hidden", out);
        out_.collect(prefix + ".out", out);
    }

    Actor clone() const {
        Actor a;
        a.segments_ = segments_;
        a.activation_ = activation_;
        a.hidden_ = hidden_.clone();
        a.out_ = out_.clone();
        return a;
    }

private:
    std::vector<std::size_t> segments_;
    Activation activation_ = Activation::relu;
    Dense hidden_;
    Dense out_;
};

inline ad::Tensor actor_forward(const Actor& actor, const ad::Tensor& obs) {
    if (obs.rank() != 2 || obs.dim(1) != actor.obs_dim())
        throw Error(ErrorKind::shape_mismatch, "actor expects [batch, " + std::to_string(actor.obs_dim()) + "], got " +
                                                   shape_string(obs.shape()));
    return actor(obs);
}

/// Gaussian noise on the actor logits, linearly decayed from start to end.
struct NoiseProcess {
    double sigma_start = 0.3;
    double sigma_end = 0.02;
    std::size_t decay_steps = 1;

    double sigma(std::size_t step) const {
        if (decay_steps == 0 || step >= decay_steps) return sigma_end;
        const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
        return sigma_start + f * (sigma_end - sigma_start);
    }

    /// softmax(logits + σ ε) per segment.
    std::vector<double> perturb(const Actor& actor, const std::vector<double>& obs, double sigma,
                                GaussianStream& noise) const {
        auto logits = actor.logits(ad::Tensor::constant({1, obs.size()}, obs));
        std::vector<double> v(logits.data().begin(), logits.data().end());
        for (auto& x : v) x += sigma * noise.next();
        auto a = ad::softmax_segments(ad::Tensor::constant({1, v.size()}, v), actor.segments());
        return {a.data().begin(), a.data().end()};
    }
};

// ---------------------------------------------------------------------------
// Critic
// ---------------------------------------------------------------------------

class NccCritic {
public:
    NccCritic() = default;
    NccCritic(const NccAcConfig& config, const AgentGraph& graph, const std::vector<AgentSpec>& agents,
              std::size_t owner, std::mt19937_64& rng)
        : owner_(owner), members_(graph.closed_neighborhood(owner)) {
        if (!agents.at(owner).active()) throw Error(ErrorKind::invalid_argument, "passive agents have no critic");
        for (std::size_t j : members_) obs_enc_.emplace(j, Dense(agents[j].obs_dim, config.hidden_dim, rng));
        for (std::size_t j : members_)
            if (agents[j].active()) act_enc_.emplace(j, Dense(agents[j].action_dim(), config.hidden_dim, rng));
        activation_ = config.activation;
        gcn_obs_ = GcnLayer(config.hidden_dim, config.hidden_dim, rng, activation_);
        gcn_act_ = GcnLayer(config.hidden_dim, config.hidden_dim, rng, activation_);
        CognitionHeadConfig hc;
        hc.input_dim = config.hidden_dim;
        hc.agent_input_dim = config.hidden_dim;
        hc.latent_dim = config.latent_dim;
        hc.decoder_hidden = config.decoder_hidden;
        hc.obs_dim = agents[owner].obs_dim;
        hc.action_dim = agents[owner].action_dim();
        hc.hidden_activation = activation_;
        head_ = CognitionHead(hc, rng);
        q_hidden_ = Dense(config.latent_dim, config.q_hidden, rng);
        q_out_ = Dense(config.q_hidden, 1, rng);
        hidden_dim_ = config.hidden_dim;
    }

    std::size_t owner() const { return owner_; }
    const std::vector<std::size_t>& members() const { return members_; }
    std::size_t hidden_dim() const { return hidden_dim_; }
    Activation activation() const { return activation_; }
    const Dense& obs_encoder(std::size_t j) const { return obs_enc_.at(j); }
    const Dense* action_encoder(std::size_t j) const {
        auto it = act_enc_.find(j);
        return it == act_enc_.end() ? nullptr : &it->second;
    }
    const GcnLayer& gcn_obs() const { return gcn_obs_; }
    const GcnLayer& gcn_act() const { return gcn_act_; }
    const CognitionHead& head() const { return head_; }
    const Dense& q_hidden() const { return q_hidden_; }
    const Dense& q_out() const { return q_out_; }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        for (const auto& [j, d] : obs_enc_) d.collect(prefix + ".obs_enc." + std::to_string(j), out);
        for (const auto& [j, d] : act_enc_) d.collect(prefix + ".act_enc." + std::to_string(j), out);
        out.push_back({prefix + ".gcn_obs.weight", gcn_obs_.weight});
        out.push_back({prefix + ".gcn_act.weight", gcn_act_.weight});
        head_.collect(prefix + ".cognition", out);
        q_hidden_.collect(prefix + ".q.hidden", out);
        q_out_.collect(prefix + ".q.out", out);
    }

    NccCritic clone() const {
        NccCritic c;
        c.owner_ = owner_;
        c.members_ = members_;
        c.hidden_dim_ = hidden_dim_;
        c.activation_ = activation_;
        for (const auto& [j, d] : obs_enc_) c.obs_enc_.emplace(j, d.clone());
        for (const auto& [j, d] : act_enc_) c.act_enc_.emplace(j, d.clone());
        c.gcn_obs_ = gcn_obs_.clone();
        c.gcn_act_ = gcn_act_.clone();
        c.head_ = head_.clone();
        c.q_hidden_ = q_hidden_.clone();
        c.q_out_ = q_out_.clone();
        return c;
    }

private:
    std::size_t owner_ = 0;
    std::vector<std::size_t> members_;
    std::size_t hidden_dim_ = 0;
    Activation activation_ = Activation::relu;
    std::map<std::size_t, Dense> obs_enc_;
    std::map<std::size_t, Dense> act_enc_;
    GcnLayer gcn_obs_;
    GcnLayer gcn_act_;
    CognitionHead head_;
    Dense q_hidden_;
    Dense q_out_;
};

struct CriticForward {
    ad::Tensor q;  // [batch]
    GaussianLatent latent;
    std::optional<Reconstruction> reconstruction;  // training mode only
};

/// Q_i for row-batched observations and actions of every agent. Only the
/// critic's closed neighborhood is read; other entries may be undefined.
inline CriticForward critic_forward(const NccCritic& critic, const AgentGraph& graph, std::span<const ad::Tensor> obs,
                                    std::span<const ad::Tensor> actions, bool eval_mode,
                                    GaussianStream* reparam = nullptr) {
    if (obs.size() != graph.size() || actions.size() != graph.size())
        throw Error(ErrorKind::shape_mismatch, "critic_forward: observations and actions must cover all " +
                                                   std::to_string(graph.size()) + " agents");
    const std::size_t batch = obs[critic.owner()].dim(0);
    std::vector<ad::Tensor> ho(graph.size()), ha(graph.size());
    for (std::size_t j : critic.members()) {
        const auto& enc = critic.obs_encoder(j);
        if (obs[j].rank() != 2 || obs[j].dim(1) != enc.in_dim() || obs[j].dim(0) != batch)
            throw Error(ErrorKind::shape_mismatch, "critic " + std::to_string(critic.owner()) + ": agent " +
                                                       std::to_string(j) + " observation " + shape_string(obs[j].shape()));
        ho[j] = activate(critic.activation(), enc(obs[j]));
        if (const auto* act = critic.action_encoder(j)) {
            if (actions[j].rank() != 2 || actions[j].dim(1) != act->in_dim() || actions[j].dim(0) != batch)
                throw Error(ErrorKind::shape_mismatch, "critic " + std::to_string(critic.owner()) + ": agent " +
                                                           std::to_string(j) + " action " +
                                                           shape_string(actions[j].shape()));
            ha[j] = activate(critic.activation(), (*act)(actions[j]));
        } else {
            ha[j] = ad::Tensor::zeros({batch, critic.hidden_dim()});
        }
    }
    const std::size_t i = critic.owner();
    auto merged = ad::add(gcn_forward_one(critic.gcn_obs(), graph, i, ho), gcn_forward_one(critic.gcn_act(), graph, i, ha));
    auto enc = critic.head().encode(merged, ha[i]);
    CriticForward out;
    out.latent = enc.latent;
    ad::Tensor c;
    if (eval_mode) {
        c = enc.latent.mu;
    } else {
        if (!reparam) throw Error(ErrorKind::invalid_argument, "critic_forward: training mode needs a reparameterization stream");
        c = sample(enc.latent, reparam->tensor(enc.latent.mu.shape()));
        out.reconstruction = critic.head().reconstruct(c);
    }
    auto z = ad::add(enc.agent, c);
    out.q = ad::reshape(critic.q_out()(activate(critic.activation(), critic.q_hidden()(z))), {batch});
    return out;
}

struct Transition {
    std::vector<std::vector<double>> observations;
    std::vector<std::vector<double>> actions;  // empty for passive agents
    double reward = 0.0;
    std::vector<std::vector<double>> next_observations;
    bool terminal = false;
};

struct Batch {
    std::vector<ad::Tensor> obs;
    std::vector<ad::Tensor> actions;  // undefined for passive agents
    std::vector<ad::Tensor> next_obs;
    std::vector<double> reward;
    std::vector<double> terminal;
    std::size_t size() const { return reward.size(); }
};

inline Batch make_batch(std::span<const Transition* const> rows, const std::vector<AgentSpec>& agents) {
    if (rows.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
    Batch b;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        std::vector<const std::vector<double>*> o, o2, a;
        for (const auto* t : rows) {
            o.push_back(&t->observations.at(i));
            o2.push_back(&t->next_observations.at(i));
            a.push_back(&t->actions.at(i));
        }
        b.obs.push_back(stack_rows(o, agents[i].obs_dim));
        b.next_obs.push_back(stack_rows(o2, agents[i].obs_dim));
        b.actions.push_back(agents[i].active() ? stack_rows(a, agents[i].action_dim()) : ad::Tensor{});
    }
    for (const auto* t : rows) {
        b.reward.push_back(t->reward);
        b.terminal.push_back(t->terminal ? 1.0 : 0.0);
    }
    return b;
}

/// y = r + γ (1 − terminal) Q⁻_i(o′, μ⁻(o′)), latent means on the target side.
inline std::vector<double> critic_td_target(const NccCritic& target_critic, const AgentGraph& graph,
                                            std::span<const double> reward, std::span<const ad::Tensor> next_obs,
                                            std::span<const ad::Tensor> next_actions, std::span<const double> terminal,
                                            double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw Error(ErrorKind::domain, "gamma must lie in [0, 1]");
    const auto fwd = critic_forward(target_critic, graph, next_obs, next_actions, true);
    std::vector<double> y(reward.size());
    for (std::size_t r = 0; r < y.size(); ++r)
        y[r] = terminal[r] > 0.0 ? reward[r] : reward[r] + gamma * fwd.q.data()[r];
    return y;
}

/// mean_b δ_i² for an already computed online forward.
inline ad::Tensor critic_td_loss(const CriticForward& online, std::vector<double> targets) {
    return ad::mse(ad::Tensor::vector(std::move(targets)), online.q);
}

/// L2(o_i, ô_i) + L2(a_i, â_i) + neighbor KL (or KL to the unit prior).
inline ad::Tensor critic_cd_loss(const CriticForward& online, const ad::Tensor& obs_i, const ad::Tensor& action_i,
                                 std::span<const GaussianLatent> neighbor_latents, CdMode mode,
                                 bool stop_grad_neighbors = false) {
    if (!online.reconstruction || !online.reconstruction->action)
        throw Error(ErrorKind::invalid_argument, "critic_cd_loss needs a training-mode forward with action decoder");
    const ReconstructionTerm terms[] = {{obs_i, online.reconstruction->obs}, {action_i, *online.reconstruction->action}};
    return cd_loss(terms, online.latent, neighbor_latents, mode, stop_grad_neighbors);
}

/// One ascent step on mean_b Q(μ_θ(o)) for a single actor. `critic` maps the
/// actor's batch of actions to a [batch] tensor of values; its parameters must
/// not be in `optimizer`. Returns the surrogate objective before the step.
template <class Critic>
double actor_update(const Actor& actor, ad::Optimizer& optimizer, const ad::Tensor& obs, Critic&& critic) {
    auto objective = ad::mean(critic(actor_forward(actor, obs)));
    auto loss = ad::negate(objective);
    ad::backward(loss);
    optimizer.step();
    return objective.item();
}

struct AgentMetrics {
    double td = 0.0;
    double cd = 0.0;
    double cognition = 0.0;
};

struct IterationMetrics {
    double td = 0.0;  // summed over agents
    double cd = 0.0;
    double actor_objective = 0.0;
    double neighbor_kl = 0.0;
    std::vector<AgentMetrics> agents;  // indexed by agent; zeros for passive agents
};

class NccAcLearner {
public:
    NccAcLearner(NccAcConfig config, AgentGraph graph, std::vector<AgentSpec> agents, std::uint64_t seed)
        : config_(std::move(config)),
          graph_(std::move(graph)),
          agents_(std::move(agents)),
          replay_(config_.replay_capacity),
          explore_(make_stream(seed, StreamId::explore)),
          reparam_(make_stream(seed, StreamId::reparam)),
          replay_rng_(make_stream(seed, StreamId::replay)) {
        if (graph_.size() != agents_.size())
            throw Error(ErrorKind::config, "agent graph has " + std::to_string(graph_.size()) + " nodes for " +
                                               std::to_string(agents_.size()) + " agents");
        auto init = make_stream(seed, StreamId::init);
        actors_.resize(agents_.size());
        critics_.resize(agents_.size());
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            if (!agents_[i].active()) continue;
            active_.push_back(i);
            actors_[i] = Actor(agents_[i], config_.actor_hidden, init, config_.activation);
            critics_[i] = NccCritic(config_, graph_, agents_, i, init);
        }
        if (active_.empty()) throw Error(ErrorKind::config, "no agent has an action to learn");
        target_actors_.resize(agents_.size());
        target_critics_.resize(agents_.size());
        actor_opt_.resize(agents_.size());
        critic_opt_.resize(agents_.size());
        for (std::size_t i : active_) {
            target_actors_[i] = actors_[i]->clone();
            target_critics_[i] = critics_[i]->clone();
            actor_opt_[i] = ad::Optimizer(config_.actor_optimizer, tensors_of(actor_parameters(i)));
            critic_opt_[i] = ad::Optimizer(config_.critic_optimizer, tensors_of(critic_parameters(i)));
        }
    }

    const NccAcConfig& config() const { return config_; }
    const AgentGraph& graph() const { return graph_; }
    const std::vector<AgentSpec>& agents() const { return agents_; }
    const std::vector<std::size_t>& active() const { return active_; }
    const Actor& actor(std::size_t i) const { return *actors_.at(i); }
    const NccCritic& critic(std::size_t i) const { return *critics_.at(i); }
    const NccCritic& target_critic(std::size_t i) const { return *target_critics_.at(i); }
    const Actor& target_actor(std::size_t i) const { return *target_actors_.at(i); }
    ReplayBuffer<Transition>& replay() { return replay_; }
    std::size_t iterations() const { return iterations_; }

    std::vector<NamedTensor> actor_parameters(std::size_t i) const {
        std::vector<NamedTensor> out;
        actors_.at(i)->collect("actor." + std::to_string(i), out);
        return out;
    }
    std::vector<NamedTensor> critic_parameters(std::size_t i) const {
        std::vector<NamedTensor> out;
        critics_.at(i)->collect("critic." + std::to_string(i), out);
        return out;
    }

    /// Every online parameter, actors then critics, in agent order.
    std::vector<NamedTensor> parameters() const {
        std::vector<NamedTensor> out;
        for (std::size_t i : active_) actors_[i]->collect("actor." + std::to_string(i), out);
        for (std::size_t i : active_) critics_[i]->collect("critic." + std::to_string(i), out);
        return out;
    }

    std::vector<NamedTensor> target_parameters() const {
        std::vector<NamedTensor> out;
        for (std::size_t i : active_) target_actors_[i]->collect("actor." + std::to_string(i), out);
        for (std::size_t i : active_) target_critics_[i]->collect("critic." + std::to_string(i), out);
        return out;
    }

    /// Deterministic joint action; passive agents get an empty vector.
    std::vector<std::vector<double>> act(const std::vector<std::vector<double>>& observations) const {
        std::vector<std::vector<double>> out(agents_.size());
        for (std::size_t i : active_) {
            const auto& o = observations.at(i);
            auto a = (*actors_[i])(ad::Tensor::constant({1, o.size()}, o));
            out[i].assign(a.data().begin(), a.data().end());
        }
        return out;
    }

    std::vector<std::vector<double>> explore(const std::vector<std::vector<double>>& observations,
                                             const NoiseProcess& noise, double sigma) {
        std::vector<std::vector<double>> out(agents_.size());
        for (std::size_t i : active_) out[i] = noise.perturb(*actors_[i], observations.at(i), sigma, explore_);
        return out;
    }

    void store(Transition t) { replay_.push(std::move(t)); }

    std::optional<IterationMetrics> train_iteration() {
        if (replay_.size() < config_.batch_size) {
            warn("train_iteration skipped: replay buffer holds fewer transitions than one batch");
            return std::nullopt;
        }
        const auto rows = replay_.sample(config_.batch_size, replay_rng_);
        return train_on(make_batch(rows, agents_));
    }

    IterationMetrics train_on(const Batch& batch) {
        IterationMetrics m;
        m.agents.resize(agents_.size());
        const std::size_t n = agents_.size();

        // Critics: one joint backward over Σ_i (td_i + α cd_i) so neighbor
        // KL terms reach both critics, then each critic steps in agent order.
        std::vector<ad::Tensor> next_actions(n);
        for (std::size_t j : active_) next_actions[j] = (*target_actors_[j])(batch.next_obs[j]);
        std::vector<std::optional<CriticForward>> fwd(n);
        for (std::size_t i : active_)
            fwd[i] = critic_forward(*critics_[i], graph_, batch.obs, batch.actions, false, &reparam_);
        std::vector<ad::Tensor> losses;
        for (std::size_t i : active_) {
            auto y = critic_td_target(*target_critics_[i], graph_, batch.reward, batch.next_obs, next_actions,
                                      batch.terminal, config_.gamma);
            auto td = critic_td_loss(*fwd[i], std::move(y));
            m.agents[i].td = td.item();
            m.agents[i].cognition = cognition_value(fwd[i]->latent);
            ad::Tensor loss = td;
            if (config_.alpha > 0.0) {
                std::vector<GaussianLatent> nbrs;
                for (std::size_t j : graph_.neighbors(i))
                    if (fwd[j]) nbrs.push_back(fwd[j]->latent);
                auto cd = critic_cd_loss(*fwd[i], batch.obs[i], batch.actions[i], nbrs, config_.cd_mode,
                                         config_.stop_grad_neighbors);
                m.agents[i].cd = cd.item();
                loss = ad::add(td, ad::scale(cd, config_.alpha));
            }
            m.td += m.agents[i].td;
            m.cd += m.agents[i].cd;
            losses.push_back(loss);
        }
        auto critic_loss = ad::add_all(losses);
        if (!std::isfinite(critic_loss.item()))
            throw Error(ErrorKind::numeric, "non-finite critic loss " + std::to_string(critic_loss.item()));
        std::vector<std::optional<GaussianLatent>> latents(n);
        for (std::size_t i : active_) latents[i] = fwd[i]->latent;
        m.neighbor_kl = mean_neighbor_kl(graph_, latents);
        ad::backward(critic_loss);
        for (std::size_t i : active_) critic_opt_[i].step();

        // Actors: a_j = μ_j(o_j) held fixed for j ≠ i; critic i evaluated on latent means.
        std::vector<ad::Tensor> current(n);
        for (std::size_t j : active_) current[j] = (*actors_[j])(batch.obs[j]).detach();
        for (std::size_t i : active_) {
            const auto& critic = *critics_[i];
            auto objective = actor_update(*actors_[i], actor_opt_[i], batch.obs[i], [&](const ad::Tensor& a_i) {
                auto acts = current;
                acts[i] = a_i;
                return critic_forward(critic, graph_, batch.obs, acts, true).q;
            });
            zero_grads(critic_parameters(i));
            m.actor_objective += objective;
        }

        ++iterations_;
        if (config_.target_tau > 0.0) {
            soft_sync(config_.target_tau);
        } else if (config_.target_sync_interval > 0 && iterations_ % config_.target_sync_interval == 0) {
            sync_targets();
        }
        return m;
    }

    void sync_targets() {
        auto dst = target_parameters();
        copy_values(parameters(), dst);
    }

    void soft_sync(double tau) {
        auto dst = target_parameters();
        blend_values(parameters(), dst, tau);
    }

private:
    NccAcConfig config_;
    AgentGraph graph_;
    std::vector<AgentSpec> agents_;
    std::vector<std::size_t> active_;
    std::vector<std::optional<Actor>> actors_, target_actors_;
    std::vector<std::optional<NccCritic>> critics_, target_critics_;
    std::vector<ad::Optimizer> actor_opt_, critic_opt_;
    ReplayBuffer<Transition> replay_;
    GaussianStream explore_;
    GaussianStream reparam_;
    std::mt19937_64 replay_rng_;
    std::size_t iterations_ = 0;
};

} // namespace ncc::ac
