#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "adasde/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"AdaSDE: few-step diffusion sampling with learnable per-step "
                 "stochastic coefficients (2D synthetic harness)"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out-dir", out_dir, "Output directory");
        sub->add_option("--seed", seed, "Override the config seed");
    };

    CLI::App* train = app.add_subcommand("train", "Train the denoiser on the configured dataset");
    CLI::App* distill = app.add_subcommand("distill", "Optimize per-step parameters against teacher trajectories");
    CLI::App* sample = app.add_subcommand("sample", "Run the configured sampler and dump the trajectory");
    CLI::App* decompose = app.add_subcommand("decompose", "Measure gradient/discretization/total W1 errors");
    CLI::App* sweep = app.add_subcommand("sweep", "Run a batch of configs in parallel");
    for (CLI::App* sub : {train, distill, sample, decompose, sweep}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            adasde::run_sweep(config_path, out_dir, seed);
        } else {
            const std::string stage = app.get_subcommands().front()->get_name();
            adasde::run_experiment(config_path, out_dir, seed, stage);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
