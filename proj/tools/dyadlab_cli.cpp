#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "dyadlab/cli.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    std::int64_t samples = -2;
    std::int64_t resolution = 0;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "flat key=value configuration file");
    sub->add_option("--seed", flags.seed, "master RNG seed (overrides the config)");
    sub->add_option("--out", flags.out_dir, "output directory (overrides the config)");
    sub->add_option("--samples", flags.samples, "sample budget (overrides the config)");
    sub->add_option("--resolution", flags.resolution,
                    "cells per axis, a power of two (overrides the config)");
}

dyadlab::ExperimentConfig resolve(const CommonFlags& flags) {
    dyadlab::ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = dyadlab::load_config(flags.config_path);
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.samples != -2) cfg.samples = flags.samples;
    if (flags.resolution != 0) {
        if (flags.resolution < 2 || (flags.resolution & (flags.resolution - 1)) != 0)
            throw std::invalid_argument("--resolution must be a power of two >= 2");
        int k = 0;
        while ((std::int64_t(1) << k) < flags.resolution) ++k;
        cfg.k_min = -k;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyadlab: numerical experiments on random dyadic lattices"};
    app.require_subcommand(1);

    using Runner = dyadlab::RunReport (*)(const dyadlab::ExperimentConfig&);
    std::map<std::string, std::pair<Runner, std::string>> commands = {
        {"a2-sweep", {dyadlab::run_a2_sweep, "weighted norm vs A2 characteristic"}},
        {"complexity-sweep", {dyadlab::run_complexity_sweep, "norm growth in shift complexity"}},
        {"weak11", {dyadlab::run_weak11, "weak (1,1) constants vs predicted bounds"}},
        {"carleson", {dyadlab::run_carleson, "Carleson embedding ratios and sharpness"}},
        {"corona", {dyadlab::run_corona, "stopping-cube packing ratios"}},
        {"jn", {dyadlab::run_jn, "John-Nirenberg distribution inequalities"}},
        {"representation", {dyadlab::run_representation, "kernel averaging and decay reports"}},
        {"invariants", {dyadlab::run_invariant_suite, "module invariant battery"}},
    };

    std::map<std::string, CommonFlags> flags;
    for (auto& [name, cmd] : commands) add_common(app.add_subcommand(name, cmd.second), flags[name]);

    CLI11_PARSE(app, argc, argv);

    for (auto& [name, cmd] : commands) {
        if (!app.get_subcommand(name)->parsed()) continue;
        try {
            dyadlab::ExperimentConfig cfg = resolve(flags[name]);
            dyadlab::RunReport report = cmd.first(cfg);
            dyadlab::write_report(report, cfg.out_dir);
            for (const dyadlab::CsvTable& t : report.tables)
                std::cout << "wrote " << cfg.out_dir << "/" << t.name << ".csv ("
                          << t.rows.size() << " rows)\n";
            std::cout << name << ": " << (report.pass ? "PASS" : "FAIL") << "\n";
            return report.pass ? 0 : 1;
        } catch (const std::exception& e) {
            std::cerr << name << ": error: " << e.what() << "\n";
            return 2;
        }
    }
    return 2;
}
