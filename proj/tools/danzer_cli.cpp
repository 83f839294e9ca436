#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "danzer/harness.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

danzer::ExperimentConfig load(const GlobalFlags& flags) {
    danzer::ExperimentConfig cfg;
    if (!flags.config_path.empty())
        cfg = danzer::ExperimentConfig::from_file(flags.config_path);
    if (flags.seed_set) {
        cfg.seed = flags.seed;
        cfg.has_seed = true;
    }
    if (!flags.out.empty()) cfg.out = flags.out;
    if (!flags.format.empty()) {
        if (flags.format != "json" && flags.format != "csv")
            throw std::invalid_argument("--format must be 'json' or 'csv'");
        cfg.format = flags.format;
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"danzer: witness growth and point-set experiments for convex ranges"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "experiment configuration file (JSON)");
    app.add_option("--out", flags.out, "output path (defaults to stdout)");
    app.add_option("--format", flags.format, "output format: json or csv");
    auto* seed_opt = app.add_option("--seed", flags.seed, "64-bit master seed");

    auto* witness = app.add_subcommand("witness", "grow a fixed-volume witness set");
    auto* proof2 = app.add_subcommand("proof2", "grow a witness through the volume chain");
    auto* stress = app.add_subcommand("stress", "stress-test an eps-net on the unit cube");
    auto* sweep = app.add_subcommand("sweep", "stress-test a list of eps values");
    auto* boxes = app.add_subcommand("boxes", "count points of a lattice in random unit boxes");
    auto* metric = app.add_subcommand("metric", "property checks for the set distance");
    auto* linebuild = app.add_subcommand("linebuild", "build points along the x1-axis");
    auto* schedule = app.add_subcommand("schedule", "print the shrink schedule and bounds");
    for (CLI::App* sub : app.get_subcommands({}))
        sub->fallthrough(); // global flags may follow the subcommand name

    int sched_d = 2, sched_n = 3;
    double sched_s = 1.0;
    schedule->add_option("-d,--dimension", sched_d, "dimension");
    schedule->add_option("-n,--level", sched_n, "target count");
    schedule->add_option("-s,--volume", sched_s, "volume parameter");

    CLI11_PARSE(app, argc, argv);
    flags.seed_set = seed_opt->count() > 0;

    try {
        danzer::ExperimentConfig cfg = load(flags);
        if (witness->parsed()) return danzer::run_witness_cmd(cfg);
        if (proof2->parsed()) return danzer::run_chained_cmd(cfg);
        if (stress->parsed()) return danzer::run_stress_cmd(cfg);
        if (sweep->parsed()) return danzer::run_sweep_cmd(cfg);
        if (boxes->parsed()) return danzer::run_boxes_cmd(cfg);
        if (metric->parsed()) return danzer::run_metric_cmd(cfg);
        if (linebuild->parsed()) return danzer::run_linebuild_cmd(cfg);
        if (schedule->parsed()) {
            if (flags.config_path.empty()) {
                cfg.params = {{"d", sched_d}, {"n", sched_n}, {"s", sched_s}};
            }
            return danzer::run_schedule_cmd(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return danzer::kExitError;
    }
    return danzer::kExitError;
}
