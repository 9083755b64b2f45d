#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "hfanova/cli.hpp"

int main(int argc, char** argv) {
    using namespace hfanova::cli;
    CLI::App app{"Functional ANOVA for Hilbert-valued fixed effect models"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config, out = ".";
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "Run configuration (JSON)")->envname("HFANOVA_CONFIG");
        sub->add_option("--out", out, "Output directory")->envname("HFANOVA_OUT");
        sub->add_option("--seed", rc.seed, "Random seed")->envname("HFANOVA_SEED");
        sub->add_option("--kmax", rc.kmax, "Override K_max")->envname("HFANOVA_KMAX");
        sub->add_option("--threads", rc.threads, "Worker threads")->envname("HFANOVA_THREADS")->check(CLI::PositiveNumber);
    };

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const RunConfig&);
    };
    const Command commands[] = {
        {"fit", "GLS fit: beta_hat.csv, estimability.json", cmd_fit},
        {"anova", "Variance components: components.csv, summary.json", cmd_anova},
        {"dist", "Component law: cdf.csv, cf.csv, dist.json", cmd_dist},
        {"test", "Linear hypothesis test: test_result.json", cmd_test},
        {"simulate", "Draw datasets: dataset.csv, manifest.json", cmd_simulate},
    };
    for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help));

    CLI11_PARSE(app, argc, argv);

    try {
        rc.config_path = config;
        rc.out_dir = out;
        for (const auto& c : commands) {
            if (app.got_subcommand(c.name)) c.run(rc);
        }
    } catch (const std::exception& e) {
        std::cerr << error_json(e).dump() << "\n";
        return 2;
    }
    return 0;
}
