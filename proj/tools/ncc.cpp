// Command-line entry point: train, eval, gradcheck, oracle.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncc/harness/run.hpp"
#include "ncc/verify/gradcheck.hpp"
#include "ncc/verify/oracle_suite.hpp"

namespace {

using namespace ncc;

int run_train(const std::string& config_path, const std::vector<std::uint64_t>& seeds, const std::string& out) {
    auto config = harness::load_experiment_config(config_path);
    if (!seeds.empty()) config.seeds = seeds;
    const auto dir = harness::output_dir(out.empty() ? std::filesystem::path("runs") / config.name : std::filesystem::path(out));
    auto result = harness::run_experiment(config, dir);
    int failed = 0;
    for (const auto& s : result.seeds) {
        std::printf("seed %llu: %s", static_cast<unsigned long long>(s.seed), s.ok ? "ok" : "failed");
        if (s.eval) std::printf(" eval_mean %.6f eval_std %.6f", s.eval->mean, s.eval->std);
        if (!s.ok) std::printf(" (%s)", s.message.c_str());
        std::printf("\n");
        failed += s.ok ? 0 : 1;
    }
    std::printf("outputs in %s\n", dir.string().c_str());
    return failed == 0 ? 0 : 1;
}

int run_eval(const std::string& checkpoint, const std::string& config_path, std::size_t episodes) {
    auto config = harness::load_experiment_config(config_path);
    if (episodes == 0) episodes = config.eval_episodes;
    if (episodes == 0) throw Error(ErrorKind::invalid_argument, "eval needs at least one episode");
    auto summary = harness::evaluate_checkpoint(checkpoint, config, episodes);
    std::printf("episodes %zu mean_reward %.17g std_reward %.17g\n", episodes, summary.mean, summary.std);
    return 0;
}

int run_gradcheck(std::size_t instances, std::uint64_t seed) {
    auto report = verify::run_gradcheck_suite(instances, seed, [](const verify::GradCheckCase& c) {
        std::printf("%-24s instances %4zu coords %6zu max_rel_error %.3e %s\n", c.name.c_str(), c.instances,
                    c.coordinates, c.max_rel_error, c.max_rel_error < 1e-4 ? "ok" : "FAIL");
        std::fflush(stdout);
    });
    std::printf("gradcheck %s: %zu cases in %.1f s\n", report.passed() ? "passed" : "FAILED", report.cases.size(),
                report.seconds);
    return report.passed() ? 0 : 1;
}

int run_oracle(std::uint64_t seed) {
    bool ok = true;
    for (const auto& r : verify::run_oracle_suite(seed)) {
        std::printf("%-30s trials %5zu %s  %s\n", r.name.c_str(), r.trials, r.passed ? "ok" : "FAIL", r.detail.c_str());
        ok = ok && r.passed;
    }
    std::printf("oracle %s\n", ok ? "passed" : "FAILED");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neighborhood cognitive consistency for cooperative multi-agent RL"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    std::vector<std::uint64_t> seeds;
    std::size_t episodes = 0, instances = 100;
    std::uint64_t seed = 0;

    auto* train = app.add_subcommand("train", "Train every seed of an experiment config");
    train->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--seeds", seeds, "Override the config's seed list");
    train->add_option("--out", out_dir, "Output directory (NCC_OUT_DIR takes precedence)");

    auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", config_path, "Config the checkpoint was trained with")->required()->check(CLI::ExistingFile);
    eval->add_option("--episodes", episodes, "Evaluation episodes (default: config eval_episodes)");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of all operations and losses");
    gradcheck->add_option("--instances", instances, "Random instances per case")->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", seed, "Suite seed");

    auto* oracle = app.add_subcommand("oracle", "KL, GCN and joint-max oracle comparisons");
    oracle->add_option("--seed", seed, "Suite seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) return run_train(config_path, seeds, out_dir);
        if (*eval) return run_eval(checkpoint, config_path, episodes);
        if (*gradcheck) return run_gradcheck(instances, seed);
        if (*oracle) return run_oracle(seed);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
