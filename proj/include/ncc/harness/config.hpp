#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncc/json_source.hpp"
#include "ncc/nccac.hpp"
#include "ncc/nccq.hpp"

namespace ncc::harness {

enum class Algorithm { ncc_q, graph_q, gcc_q, vdn, idqn, ncc_ac, graph_ac, gcc_ac };
enum class EnvKind { routing, wifi, bandit };

inline const std::vector<std::pair<std::string, Algorithm>>& algorithm_names() {
    static const std::vector<std::pair<std::string, Algorithm>> names{
        {"NCC_Q", Algorithm::ncc_q},   {"GRAPH_Q", Algorithm::graph_q},   {"GCC_Q", Algorithm::gcc_q},
        {"VDN", Algorithm::vdn},       {"IDQN", Algorithm::idqn},         {"NCC_AC", Algorithm::ncc_ac},
        {"GRAPH_AC", Algorithm::graph_ac}, {"GCC_AC", Algorithm::gcc_ac}};
    return names;
}

inline std::string to_string(Algorithm a) {
    for (const auto& [name, value] : algorithm_names())
        if (value == a) return name;
    return "NCC_Q";
}

inline bool is_actor_critic(Algorithm a) {
    return a == Algorithm::ncc_ac || a == Algorithm::graph_ac || a == Algorithm::gcc_ac;
}

inline q::Variant q_variant(Algorithm a) {
    switch (a) {
    case Algorithm::graph_q: return q::Variant::graph;
    case Algorithm::gcc_q: return q::Variant::gcc;
    case Algorithm::vdn: return q::Variant::vdn;
    case Algorithm::idqn: return q::Variant::idqn;
    default: return q::Variant::ncc;
    }
}

inline ac::Variant ac_variant(Algorithm a) {
    switch (a) {
    case Algorithm::graph_ac: return ac::Variant::graph;
    case Algorithm::gcc_ac: return ac::Variant::gcc;
    default: return ac::Variant::ncc;
    }
}

struct EnvSpec {
    EnvKind kind = EnvKind::bandit;
    std::string topology;  // resolved path; unused for the bandit
    std::size_t bandit_agents = 2;
    std::size_t bandit_actions = 2;
};

struct ModuleOverrides {
    std::optional<bool> gcn, cognition, mixing;
};

struct ExperimentConfig {
    std::string name = "experiment";
    EnvSpec env;
    Algorithm algorithm = Algorithm::ncc_q;
    double alpha = 0.1;
    double gamma = 0.98;
    ad::OptimizerConfig::Kind optimizer = ad::OptimizerConfig::Kind::adam;
    double learning_rate = 1e-3;        // Q network or critics
    double actor_learning_rate = 1e-3;
    std::size_t hidden = 32;
    std::size_t latent = 16;
    std::size_t decoder_hidden = 32;
    std::size_t q_hidden = 32;
    std::size_t actor_hidden = 32;
    Activation activation = Activation::relu;
    bool share_all = false;
    bool stop_grad_neighbors = false;
    ModuleOverrides modules;
    std::size_t replay_capacity = 100000;
    std::size_t batch_size = 32;
    std::size_t warmup = 0;       // transitions stored before the first update (at least one batch)
    std::size_t train_every = 1;  // env steps per gradient update
    std::size_t target_sync_interval = 200;
    double target_tau = 0.0;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double noise_start = 0.3;
    double noise_end = 0.02;
    double decay_fraction = 0.5;  // share of all training steps over which exploration decays
    std::size_t episodes = 100;
    std::size_t eval_episodes = 10;
    std::vector<std::uint64_t> seeds{0};
    std::vector<std::uint64_t> nan_seeds;  // fault injection: poison rewards for these seeds
    std::size_t nan_episode = 0;

    q::NccQConfig q_config() const {
        auto c = q::NccQConfig::for_variant(q_variant(algorithm), alpha);
        if (modules.gcn) c.modules.gcn = *modules.gcn;
        if (modules.cognition) c.modules.cognition = *modules.cognition;
        if (modules.mixing) c.modules.mixing = *modules.mixing;
        c.gamma = gamma;
        c.hidden_dim = hidden;
        c.latent_dim = latent;
        c.decoder_hidden = decoder_hidden;
        c.q_hidden = q_hidden;
        c.share_all = share_all;
        c.activation = activation;
        c.stop_grad_neighbors = stop_grad_neighbors;
        c.optimizer.kind = optimizer;
        c.optimizer.lr = learning_rate;
        c.batch_size = batch_size;
        c.replay_capacity = replay_capacity;
        c.target_sync_interval = target_sync_interval;
        return c;
    }

    ac::NccAcConfig ac_config() const {
        auto c = ac::NccAcConfig::for_variant(ac_variant(algorithm), alpha);
        c.gamma = gamma;
        c.stop_grad_neighbors = stop_grad_neighbors;
        c.actor_hidden = actor_hidden;
        c.hidden_dim = hidden;
        c.latent_dim = latent;
        c.decoder_hidden = decoder_hidden;
        c.q_hidden = q_hidden;
        c.activation = activation;
        c.actor_optimizer.kind = optimizer;
        c.actor_optimizer.lr = actor_learning_rate;
        c.critic_optimizer.kind = optimizer;
        c.critic_optimizer.lr = learning_rate;
        c.batch_size = batch_size;
        c.replay_capacity = replay_capacity;
        c.target_sync_interval = target_sync_interval;
        c.target_tau = target_tau;
        return c;
    }
};

namespace detail {

inline double unit_interval(const ObjectReader& r, const std::string& key, double fallback) {
    const double v = r.number(key, fallback);
    if (v < 0.0 || v > 1.0) r.fail(key, "must lie in [0, 1]");
    return v;
}

inline double non_negative(const ObjectReader& r, const std::string& key, double fallback) {
    const double v = r.number(key, fallback);
    if (v < 0.0) r.fail(key, "must be non-negative");
    return v;
}

inline std::size_t positive(const ObjectReader& r, const std::string& key, std::size_t fallback) {
    const auto v = r.count(key, fallback);
    if (v == 0) r.fail(key, "must be positive");
    return v;
}

inline std::vector<std::uint64_t> seed_list(const ObjectReader& r, const std::string& key) {
    std::vector<std::uint64_t> out;
    const auto& arr = r.raw(key);
    if (!arr.is_array()) r.fail(key, "expected an array of integers");
    for (std::size_t k = 0; k < arr.size(); ++k) {
        if (!arr[k].is_number_unsigned()) r.source().fail(r.child(key) / k, "expected a non-negative integer seed");
        out.push_back(arr[k].get<std::uint64_t>());
    }
    return out;
}

} // namespace detail

/// Parses and validates an experiment file. Relative topology paths resolve
/// against `base_dir`.
inline ExperimentConfig load_experiment_config(const JsonSource& src, const std::filesystem::path& base_dir) {
    using detail::non_negative;
    using detail::positive;
    using detail::unit_interval;
    ExperimentConfig c;
    ObjectReader top(src, JsonPointer{},
                     {"name", "description", "env", "algorithm", "alpha", "gamma", "optimizer", "network", "modules",
                      "replay", "target", "exploration", "episodes", "eval_episodes", "seeds", "fault_injection"});
    c.name = top.text("name", c.name);

    const auto alg = top.text("algorithm");
    const auto& names = algorithm_names();
    auto it = std::find_if(names.begin(), names.end(), [&](const auto& p) { return p.first == alg; });
    if (it == names.end())
        top.fail("algorithm", "unknown algorithm '" + alg +
                                  "' (expected NCC_Q, GRAPH_Q, GCC_Q, VDN, IDQN, NCC_AC, GRAPH_AC or GCC_AC)");
    c.algorithm = it->second;

    {
        ObjectReader env(src, top.child("env"), {"kind", "topology", "agents", "actions"});
        const auto kind = env.text("kind");
        if (kind == "routing") {
            c.env.kind = EnvKind::routing;
        } else if (kind == "wifi") {
            c.env.kind = EnvKind::wifi;
        } else if (kind == "bandit") {
            c.env.kind = EnvKind::bandit;
        } else {
            env.fail("kind", "unknown environment '" + kind + "' (expected routing, wifi or bandit)");
        }
        if (c.env.kind == EnvKind::bandit) {
            if (env.has("topology")) env.fail("topology", "the bandit takes no topology file");
            c.env.bandit_agents = positive(env, "agents", 2);
            c.env.bandit_actions = positive(env, "actions", 2);
        } else {
            if (env.has("agents") || env.has("actions"))
                env.fail(env.has("agents") ? "agents" : "actions", "only the bandit takes agents/actions");
            std::filesystem::path p = env.text("topology");
            if (p.is_relative()) p = base_dir / p;
            if (!std::filesystem::exists(p)) env.fail("topology", "file not found: " + p.string());
            c.env.topology = p.lexically_normal().string();
        }
        const bool continuous = c.env.kind == EnvKind::routing;
        if (continuous != is_actor_critic(c.algorithm))
            top.fail("algorithm", alg + (continuous ? " needs a discrete-action environment (wifi or bandit)"
                                                    : " needs the continuous routing environment"));
    }

    c.alpha = non_negative(top, "alpha", c.alpha);
    c.gamma = unit_interval(top, "gamma", c.gamma);

    if (top.has("optimizer")) {
        ObjectReader opt(src, top.child("optimizer"), {"kind", "learning_rate", "actor_learning_rate"});
        const auto kind = opt.text("kind", "adam");
        if (kind == "adam") {
            c.optimizer = ad::OptimizerConfig::Kind::adam;
        } else if (kind == "sgd") {
            c.optimizer = ad::OptimizerConfig::Kind::sgd;
        } else {
            opt.fail("kind", "expected adam or sgd");
        }
        c.learning_rate = non_negative(opt, "learning_rate", c.learning_rate);
        c.actor_learning_rate = non_negative(opt, "actor_learning_rate", c.actor_learning_rate);
    }

    if (top.has("network")) {
        ObjectReader net(src, top.child("network"),
                         {"hidden", "latent", "decoder_hidden", "q_hidden", "actor_hidden", "activation", "share_all"});
        c.hidden = positive(net, "hidden", c.hidden);
        c.latent = positive(net, "latent", c.latent);
        c.decoder_hidden = positive(net, "decoder_hidden", c.decoder_hidden);
        c.q_hidden = positive(net, "q_hidden", c.q_hidden);
        c.actor_hidden = positive(net, "actor_hidden", c.actor_hidden);
        const auto act = net.text("activation", "relu");
        if (act == "relu") {
            c.activation = Activation::relu;
        } else if (act == "tanh") {
            c.activation = Activation::tanh;
        } else {
            net.fail("activation", "expected relu or tanh");
        }
        c.share_all = net.boolean("share_all", false);
        if (c.share_all && is_actor_critic(c.algorithm)) net.fail("share_all", "only Q-learning variants share networks");
    }

    if (top.has("modules")) {
        ObjectReader mod(src, top.child("modules"), {"gcn", "cognition", "mixing", "stop_grad_neighbors"});
        for (const char* key : {"gcn", "cognition", "mixing"}) {
            if (!mod.has(key)) continue;
            if (is_actor_critic(c.algorithm)) mod.fail(key, "module bypasses apply to Q-learning variants only");
            const bool v = mod.boolean(key, true);
            if (std::string(key) == "gcn") c.modules.gcn = v;
            if (std::string(key) == "cognition") c.modules.cognition = v;
            if (std::string(key) == "mixing") c.modules.mixing = v;
        }
        c.stop_grad_neighbors = mod.boolean("stop_grad_neighbors", false);
    }

    if (top.has("replay")) {
        ObjectReader rep(src, top.child("replay"), {"capacity", "batch_size", "warmup", "train_every"});
        c.replay_capacity = positive(rep, "capacity", c.replay_capacity);
        c.batch_size = positive(rep, "batch_size", c.batch_size);
        c.warmup = rep.count("warmup", c.warmup);
        c.train_every = positive(rep, "train_every", c.train_every);
        if (c.batch_size > c.replay_capacity) rep.fail("batch_size", "exceeds replay capacity");
        if (c.warmup > c.replay_capacity) rep.fail("warmup", "exceeds replay capacity");
    }

    if (top.has("target")) {
        ObjectReader tgt(src, top.child("target"), {"sync_interval", "tau"});
        c.target_sync_interval = positive(tgt, "sync_interval", c.target_sync_interval);
        c.target_tau = unit_interval(tgt, "tau", c.target_tau);
        if (c.target_tau > 0.0 && !is_actor_critic(c.algorithm))
            tgt.fail("tau", "soft target updates apply to actor-critic variants only");
    }

    if (top.has("exploration")) {
        ObjectReader ex(src, top.child("exploration"),
                        {"epsilon_start", "epsilon_end", "noise_start", "noise_end", "decay_fraction"});
        c.epsilon_start = unit_interval(ex, "epsilon_start", c.epsilon_start);
        c.epsilon_end = unit_interval(ex, "epsilon_end", c.epsilon_end);
        c.noise_start = non_negative(ex, "noise_start", c.noise_start);
        c.noise_end = non_negative(ex, "noise_end", c.noise_end);
        c.decay_fraction = unit_interval(ex, "decay_fraction", c.decay_fraction);
    }

    c.episodes = top.count("episodes", c.episodes);
    c.eval_episodes = top.count("eval_episodes", c.eval_episodes);
    if (top.has("seeds")) {
        c.seeds = detail::seed_list(top, "seeds");
        if (c.seeds.empty()) top.fail("seeds", "needs at least one seed");
        std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
        if (unique.size() != c.seeds.size()) top.fail("seeds", "seeds must be distinct");
    }

    if (top.has("fault_injection")) {
        ObjectReader fi(src, top.child("fault_injection"), {"nan_seeds", "episode"});
        c.nan_seeds = detail::seed_list(fi, "nan_seeds");
        c.nan_episode = fi.count("episode", 0);
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    const auto src = JsonSource::from_file(path);
    return load_experiment_config(src, std::filesystem::path(path).parent_path());
}

} // namespace ncc::harness
