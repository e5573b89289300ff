#pragma once

// Seeded training runs. Per seed, in the output directory:
//   metrics_seed<S>.csv     one row per episode (schema below)
//   timing_seed<S>.csv      episode,wall_seconds
//   checkpoint_seed<S>.ckpt final online parameters (absent when episodes = 0 or the seed failed)
// and across seeds:
//   aggregate.csv           per-episode mean and population std over completed seeds
//   summary.csv             seed,status,episodes,eval_mean,eval_std,message
//
// Metrics columns: episode,mean_reward,updates,td_loss,cd_loss,neighbor_kl,cognition_0..cognition_{N-1}.
// Loss, KL and cognition columns average the gradient updates made during the
// episode and are 0 when there were none. Wall-clock time lives in the timing
// file so the metrics files stay byte-identical across reruns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncc/envs/bandit.hpp"
#include "ncc/envs/routing.hpp"
#include "ncc/envs/wifi.hpp"
#include "ncc/harness/checkpoint.hpp"
#include "ncc/harness/config.hpp"

namespace ncc::harness {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Output directory: NCC_OUT_DIR when set, otherwise the given default.
inline std::filesystem::path output_dir(const std::filesystem::path& fallback) {
    if (const char* env = std::getenv("NCC_OUT_DIR"); env && *env) return env;
    return fallback;
}

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

struct DiscreteTask {
    std::unique_ptr<envs::DiscreteEnv> env;
    std::vector<q::AgentSpec> agents;
    std::size_t horizon = 1;
};

struct ContinuousTask {
    std::unique_ptr<envs::ContinuousEnv> env;
    std::vector<ac::AgentSpec> agents;
    std::size_t horizon = 1;
};

inline DiscreteTask make_discrete_task(const EnvSpec& spec, std::uint64_t seed) {
    DiscreteTask t;
    if (spec.kind == EnvKind::wifi) {
        auto topo = envs::load_wifi_topology(spec.topology);
        t.horizon = topo.horizon;
        t.env = std::make_unique<envs::WifiEnv>(std::move(topo), seed);
    } else if (spec.kind == EnvKind::bandit) {
        t.env = std::make_unique<envs::CoordinationBandit>(spec.bandit_agents, spec.bandit_actions);
    } else {
        throw Error(ErrorKind::config, "routing has continuous actions; use an actor-critic algorithm");
    }
    for (std::size_t i = 0; i < t.env->n_agents(); ++i) t.agents.push_back({t.env->obs_dim(i), t.env->n_actions(i)});
    return t;
}

inline ContinuousTask make_continuous_task(const EnvSpec& spec, std::uint64_t seed) {
    if (spec.kind != EnvKind::routing) throw Error(ErrorKind::config, "actor-critic algorithms need the routing environment");
    ContinuousTask t;
    auto topo = envs::load_routing_topology(spec.topology);
    t.horizon = topo.horizon;
    t.env = std::make_unique<envs::RoutingEnv>(std::move(topo), seed);
    for (std::size_t i = 0; i < t.env->n_agents(); ++i) t.agents.push_back({t.env->obs_dim(i), t.env->action_segments(i)});
    return t;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsRecord {
    std::size_t episode = 0;
    double mean_reward = 0.0;
    std::size_t updates = 0;
    double td_loss = 0.0;
    double cd_loss = 0.0;
    double neighbor_kl = 0.0;
    std::vector<double> cognition;
    double wall_seconds = 0.0;
};

inline std::string metrics_header(std::size_t agents) {
    std::string h = "episode,mean_reward,updates,td_loss,cd_loss,neighbor_kl";
    for (std::size_t i = 0; i < agents; ++i) h += ",cognition_" + std::to_string(i);
    return h;
}

inline std::string metrics_row(const MetricsRecord& r) {
    std::string s = std::to_string(r.episode) + "," + format_double(r.mean_reward) + "," + std::to_string(r.updates) +
                    "," + format_double(r.td_loss) + "," + format_double(r.cd_loss) + "," +
                    format_double(r.neighbor_kl);
    for (double c : r.cognition) s += "," + format_double(c);
    return s;
}

/// Accumulates per-update metrics into one episode record.
class EpisodeAccumulator {
public:
    explicit EpisodeAccumulator(std::size_t agents) : cognition_(agents, 0.0) {}

    void reward(double r) {
        reward_ += r;
        ++steps_;
    }

    void update(double td, double cd, double kl, const std::vector<double>& cognition) {
        td_ += td;
        cd_ += cd;
        kl_ += kl;
        for (std::size_t i = 0; i < cognition_.size(); ++i) cognition_[i] += cognition[i];
        ++updates_;
    }

    MetricsRecord finish(std::size_t episode, double seconds) const {
        MetricsRecord r;
        r.episode = episode;
        r.mean_reward = steps_ ? reward_ / static_cast<double>(steps_) : 0.0;
        r.updates = updates_;
        const double n = updates_ ? static_cast<double>(updates_) : 1.0;
        r.td_loss = td_ / n;
        r.cd_loss = cd_ / n;
        r.neighbor_kl = kl_ / n;
        for (double c : cognition_) r.cognition.push_back(c / n);
        r.wall_seconds = seconds;
        return r;
    }

private:
    double reward_ = 0.0, td_ = 0.0, cd_ = 0.0, kl_ = 0.0;
    std::size_t steps_ = 0, updates_ = 0;
    std::vector<double> cognition_;
};

struct EvalSummary {
    double mean = 0.0;
    double std = 0.0;  // population std over episodes
    std::vector<double> episode_rewards;
};

inline EvalSummary summarize(std::vector<double> rewards) {
    EvalSummary s;
    s.episode_rewards = std::move(rewards);
    if (s.episode_rewards.empty()) return s;
    for (double r : s.episode_rewards) s.mean += r;
    s.mean /= static_cast<double>(s.episode_rewards.size());
    double var = 0.0;
    for (double r : s.episode_rewards) var += (r - s.mean) * (r - s.mean);
    s.std = std::sqrt(var / static_cast<double>(s.episode_rewards.size()));
    return s;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

using DiscretePolicy = std::function<std::vector<std::size_t>(const envs::Observations&)>;
using ContinuousPolicy = std::function<std::vector<std::vector<double>>(const envs::Observations&)>;

/// Per-episode mean rewards of `policy` on a fresh environment built from `seed`.
inline std::vector<double> rollout_discrete(const EnvSpec& spec, std::uint64_t seed, std::size_t episodes,
                                            const DiscretePolicy& policy) {
    auto task = make_discrete_task(spec, seed);
    std::vector<double> out;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = task.env->reset();
        double total = 0.0;
        std::size_t steps = 0;
        for (bool done = false; !done;) {
            auto res = task.env->step(policy(obs));
            total += res.reward;
            ++steps;
            done = res.terminal;
            obs = std::move(res.observations);
        }
        out.push_back(total / static_cast<double>(steps));
    }
    return out;
}

inline std::vector<double> rollout_continuous(const EnvSpec& spec, std::uint64_t seed, std::size_t episodes,
                                              const ContinuousPolicy& policy) {
    auto task = make_continuous_task(spec, seed);
    std::vector<double> out;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = task.env->reset();
        double total = 0.0;
        std::size_t steps = 0;
        for (bool done = false; !done;) {
            auto res = task.env->step(policy(obs));
            total += res.reward;
            ++steps;
            done = res.terminal;
            obs = std::move(res.observations);
        }
        out.push_back(total / static_cast<double>(steps));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string message;
    std::vector<MetricsRecord> records;
    std::optional<EvalSummary> eval;
    std::string checkpoint;  // empty when none was written
};

struct RunResult {
    std::vector<SeedResult> seeds;
    std::filesystem::path out_dir;
};

inline std::string seed_file(const std::filesystem::path& dir, const std::string& stem, std::uint64_t seed,
                             const std::string& ext) {
    return (dir / (stem + "_seed" + std::to_string(seed) + ext)).string();
}

inline std::string module_name(const ExperimentConfig& c) { return to_string(c.algorithm); }

namespace detail {

inline std::size_t decay_steps(const ExperimentConfig& c, std::size_t horizon) {
    return static_cast<std::size_t>(c.decay_fraction * static_cast<double>(c.episodes * horizon));
}

inline double linear(double start, double end, std::size_t step, std::size_t over) {
    if (over == 0 || step >= over) return end;
    return start + (end - start) * static_cast<double>(step) / static_cast<double>(over);
}

class SeedFiles {
public:
    SeedFiles(const std::filesystem::path& dir, std::uint64_t seed, std::size_t agents)
        : metrics_(seed_file(dir, "metrics", seed, ".csv"), std::ios::trunc),
          timing_(seed_file(dir, "timing", seed, ".csv"), std::ios::trunc) {
        if (!metrics_ || !timing_) throw Error(ErrorKind::io, "cannot write metrics under " + dir.string());
        metrics_ << metrics_header(agents) << "\n" << std::flush;
        timing_ << "episode,wall_seconds\n" << std::flush;
    }

    void write(const MetricsRecord& r) {
        metrics_ << metrics_row(r) << "\n" << std::flush;
        timing_ << r.episode << "," << format_double(r.wall_seconds) << "\n" << std::flush;
    }

private:
    std::ofstream metrics_, timing_;
};

inline bool poisoned(const ExperimentConfig& c, std::uint64_t seed, std::size_t episode) {
    return episode == c.nan_episode && std::find(c.nan_seeds.begin(), c.nan_seeds.end(), seed) != c.nan_seeds.end();
}

inline void train_q_seed(const ExperimentConfig& c, std::uint64_t seed, const std::filesystem::path& dir, SeedResult& out) {
    auto task = make_discrete_task(c.env, seed);
    q::NccQLearner learner(c.q_config(), task.env->graph(), task.agents, seed);
    SeedFiles files(dir, seed, task.agents.size());
    const std::size_t decay = decay_steps(c, task.horizon);
    const std::size_t ready = std::max(c.batch_size, c.warmup);
    std::size_t step = 0;
    for (std::size_t e = 0; e < c.episodes; ++e) {
        const auto start = std::chrono::steady_clock::now();
        EpisodeAccumulator acc(task.agents.size());
        auto obs = task.env->reset();
        for (bool done = false; !done; ++step) {
            const double eps = linear(c.epsilon_start, c.epsilon_end, step, decay);
            auto actions = learner.act(obs, eps);
            auto res = task.env->step(actions);
            acc.reward(res.reward);
            done = res.terminal;
            const double stored = poisoned(c, seed, e) ? std::nan("") : res.reward;
            learner.store({obs, actions, stored, res.observations, res.terminal});
            if (learner.replay().size() >= ready && step % c.train_every == 0) {
                auto m = learner.train_step();
                acc.update(m->td, m->cd, m->neighbor_kl, m->cognition);
            }
            obs = std::move(res.observations);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.records.push_back(acc.finish(e, secs));
        files.write(out.records.back());
    }
    if (c.episodes == 0) return;
    out.checkpoint = seed_file(dir, "checkpoint", seed, ".ckpt");
    save_checkpoint(out.checkpoint, {module_name(c), seed, learner.updates()}, learner.parameters());
    if (c.eval_episodes > 0)
        out.eval = summarize(rollout_discrete(c.env, seed, c.eval_episodes,
                                              [&](const envs::Observations& o) { return learner.greedy(o); }));
}

inline void train_ac_seed(const ExperimentConfig& c, std::uint64_t seed, const std::filesystem::path& dir, SeedResult& out) {
    auto task = make_continuous_task(c.env, seed);
    ac::NccAcLearner learner(c.ac_config(), task.env->graph(), task.agents, seed);
    SeedFiles files(dir, seed, task.agents.size());
    const ac::NoiseProcess noise{c.noise_start, c.noise_end, decay_steps(c, task.horizon)};
    const std::size_t ready = std::max(c.batch_size, c.warmup);
    std::size_t step = 0;
    for (std::size_t e = 0; e < c.episodes; ++e) {
        const auto start = std::chrono::steady_clock::now();
        EpisodeAccumulator acc(task.agents.size());
        auto obs = task.env->reset();
        for (bool done = false; !done; ++step) {
            auto actions = learner.explore(obs, noise, noise.sigma(step));
            auto res = task.env->step(actions);
            acc.reward(res.reward);
            done = res.terminal;
            const double stored = poisoned(c, seed, e) ? std::nan("") : res.reward;
            learner.store({obs, actions, stored, res.observations, res.terminal});
            if (learner.replay().size() >= ready && step % c.train_every == 0) {
                auto m = learner.train_iteration();
                std::vector<double> cognition;
                for (const auto& a : m->agents) cognition.push_back(a.cognition);
                acc.update(m->td, m->cd, m->neighbor_kl, cognition);
            }
            obs = std::move(res.observations);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.records.push_back(acc.finish(e, secs));
        files.write(out.records.back());
    }
    if (c.episodes == 0) return;
    out.checkpoint = seed_file(dir, "checkpoint", seed, ".ckpt");
    save_checkpoint(out.checkpoint, {module_name(c), seed, learner.iterations()}, learner.parameters());
    if (c.eval_episodes > 0)
        out.eval = summarize(rollout_continuous(c.env, seed, c.eval_episodes,
                                                [&](const envs::Observations& o) { return learner.act(o); }));
}

inline void write_aggregate(const std::filesystem::path& dir, const std::vector<SeedResult>& seeds) {
    std::ofstream out(dir / "aggregate.csv", std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write aggregate.csv under " + dir.string());
    const char* names[] = {"mean_reward", "td_loss", "cd_loss", "neighbor_kl"};
    out << "episode,seeds";
    for (const char* n : names) out << "," << n << "_mean," << n << "_std";
    out << "\n";
    std::vector<const SeedResult*> done;
    for (const auto& s : seeds)
        if (s.ok) done.push_back(&s);
    if (done.empty()) return;
    const std::size_t episodes = done.front()->records.size();
    for (std::size_t e = 0; e < episodes; ++e) {
        out << e << "," << done.size();
        for (int k = 0; k < 4; ++k) {
            std::vector<double> v;
            for (const auto* s : done) {
                const auto& r = s->records[e];
                v.push_back(k == 0 ? r.mean_reward : k == 1 ? r.td_loss : k == 2 ? r.cd_loss : r.neighbor_kl);
            }
            const auto stats = summarize(v);
            out << "," << format_double(stats.mean) << "," << format_double(stats.std);
        }
        out << "\n";
    }
}

inline void write_summary(const std::filesystem::path& dir, const std::vector<SeedResult>& seeds) {
    std::ofstream out(dir / "summary.csv", std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write summary.csv under " + dir.string());
    out << "seed,status,episodes,eval_mean,eval_std,message\n";
    for (const auto& s : seeds) {
        std::string msg = s.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << s.seed << "," << (s.ok ? "ok" : "failed") << "," << s.records.size() << ","
            << (s.eval ? format_double(s.eval->mean) : "") << "," << (s.eval ? format_double(s.eval->std) : "") << ","
            << msg << "\n";
    }
}

} // namespace detail

/// Trains every seed in turn. A numeric failure aborts only that seed.
inline RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    RunResult result;
    result.out_dir = out_dir;
    for (auto seed : config.seeds) {
        SeedResult sr;
        sr.seed = seed;
        try {
            if (is_actor_critic(config.algorithm)) {
                detail::train_ac_seed(config, seed, out_dir, sr);
            } else {
                detail::train_q_seed(config, seed, out_dir, sr);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            sr.ok = false;
            sr.message = e.what();
            sr.checkpoint.clear();
        }
        result.seeds.push_back(std::move(sr));
    }
    detail::write_aggregate(out_dir, result.seeds);
    detail::write_summary(out_dir, result.seeds);
    return result;
}

/// Greedy rollouts of a saved policy on a fresh environment seeded from the checkpoint.
inline EvalSummary evaluate_checkpoint(const std::string& checkpoint, const ExperimentConfig& config,
                                       std::size_t n_episodes) {
    const auto header = read_checkpoint(checkpoint).header;
    if (is_actor_critic(config.algorithm)) {
        auto task = make_continuous_task(config.env, header.seed);
        ac::NccAcLearner learner(config.ac_config(), task.env->graph(), task.agents, header.seed);
        auto params = learner.parameters();
        load_checkpoint(checkpoint, module_name(config), params);
        return summarize(rollout_continuous(config.env, header.seed, n_episodes,
                                            [&](const envs::Observations& o) { return learner.act(o); }));
    }
    auto task = make_discrete_task(config.env, header.seed);
    q::NccQLearner learner(config.q_config(), task.env->graph(), task.agents, header.seed);
    auto params = learner.parameters();
    load_checkpoint(checkpoint, module_name(config), params);
    return summarize(rollout_discrete(config.env, header.seed, n_episodes,
                                      [&](const envs::Observations& o) { return learner.greedy(o); }));
}

} // namespace ncc::harness
