#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spstack/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Exact Bayesian geostatistical prediction by stacking conjugate spatial models"};
    app.require_subcommand(1);

    std::string config_path;
    int threads = -1;
    long long seed = -1;
    std::string out_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "override the output directory");
    };

    CLI::App* fit = app.add_subcommand("fit", "fit stacking weights to a CSV dataset");
    CLI::App* simulate = app.add_subcommand("simulate", "run the synthetic replication study");
    CLI::App* diagnostics =
        app.add_subcommand("diagnostics", "compute the asymptotic-behaviour diagnostics");
    add_common(fit);
    add_common(simulate);
    add_common(diagnostics);

    CLI11_PARSE(app, argc, argv);

    try {
        spstack::cli::RunConfig config = spstack::cli::parse_config(config_path);
        if (fit->parsed()) config.mode = spstack::cli::Mode::fit;
        if (simulate->parsed()) config.mode = spstack::cli::Mode::simulate;
        if (diagnostics->parsed()) config.mode = spstack::cli::Mode::diagnostics;
        if (threads >= 0) config.threads = threads;
        if (seed >= 0) {
            config.seed = static_cast<std::uint64_t>(seed);
            config.sim.seed = config.seed;
        }
        if (!out_dir.empty()) config.out_dir = out_dir;
        return spstack::cli::run(config);
    } catch (const std::exception& e) {
        std::cerr << "{\"error\": \"" << e.what() << "\"}\n";
        return 1;
    }
}
